import math

import mpmath
import numpy as np
import pytest

from core.errors import AtPole, BothResiduesZero, DivergesAt, PathInvalid
from services.forms import Cylinder
from services.graph_core import PathWord, enumerate_paths, telescope
from services.spectral import (
    LevelDiagonal,
    complex_gamma,
    complex_log_gamma,
    dirac_spectrum,
    direct_sum,
    direct_sum_state,
    frak_f,
    geometric_weights,
    heat_residual_limit,
    heat_trace_direct,
    heat_trace_expansion,
    heat_trace_sweep,
    laplace_ratio_state,
    leading_residue,
    log_coefficient,
    log_slope_fit,
    mellin_cross_check,
    nonresonant_phase_check,
    poles_and_residues,
    spectral_dimension,
    spectral_measure,
    state_cesaro,
    state_weights,
    tensor_dimension,
    tensor_heat_trace,
    tensor_heat_trace_double_sum,
    tensor_weights,
    zeta_closed,
    zeta_series,
)
from tests.conftest import GOLDEN

LN2 = math.log(2)


# zeta function


def test_dyadic_dimension_and_residue(dyadic):
    assert spectral_dimension(dyadic) == pytest.approx(1.0, abs=1e-15)
    assert leading_residue(dyadic) == pytest.approx(1 / LN2, abs=1e-9)
    step = 1e-6
    numeric = (step * zeta_closed(dyadic, 1 + step)).real
    assert numeric == pytest.approx(1 / LN2, rel=1e-4)


def test_dyadic_poles_carry_convention_warning(dyadic):
    report = poles_and_residues(dyadic, kmax=1)
    assert len(report.poles) == 3
    assert report.period == pytest.approx(2 * math.pi / LN2)
    assert all(p.verified for p in report.poles)
    assert {round(p.location.imag / report.period) for p in report.poles} == {-1, 0, 1}
    assert report.warnings and "alternative_residue" in report.warnings[0]


def test_ev1_pole_at_zero_is_removable(ev1):
    report = poles_and_residues(ev1)
    at_zero = [p for p in report.poles if abs(p.location) < 1e-12]
    assert len(at_zero) == 1
    assert at_zero[0].removable
    assert abs(at_zero[0].residue) < 1e-12


def test_zeta_series_matches_closed_form(dyadic, fibonacci):
    value, tail = zeta_series(dyadic, 2, 60)
    assert value.real == pytest.approx(1.0, abs=1e-15)
    assert zeta_closed(dyadic, 2).real == pytest.approx(1.0, abs=1e-15)
    z = 1.7 + 0.4j
    series, tail = zeta_series(fibonacci, z, 80)
    assert abs(series - zeta_closed(fibonacci, z)) <= tail + 1e-12


def test_zeta_domain_errors(dyadic):
    with pytest.raises(DivergesAt):
        zeta_series(dyadic, 1.0, 10)
    with pytest.raises(AtPole):
        zeta_closed(dyadic, 1.0)


def test_dirac_spectrum(dyadic):
    assert dirac_spectrum(dyadic, 3) == [(2.0, 2), (4.0, 4), (8.0, 8)]
    assert dirac_spectrum(dyadic, 0) == []


def test_telescoping_preserves_dimension(dyadic, fibonacci):
    for g in (dyadic, fibonacci):
        assert spectral_dimension(telescope(g, 2)) == pytest.approx(spectral_dimension(g), abs=1e-12)


# Gamma


@pytest.mark.parametrize("z", [0.5, 2.5 + 1j, -1.3 + 0.2j, 0.25 - 7j, 3.0])
def test_complex_gamma_against_mpmath(z):
    assert complex_gamma(z) == pytest.approx(complex(mpmath.gamma(z)), rel=1e-12)


@pytest.mark.parametrize("z", [0.5 - 1e-16 + 250j, -3.5 + 300j, 0.49999999999999994 + 228.49759118455472j, 2.0 - 400j])
def test_complex_gamma_far_from_the_real_axis(z):
    with mpmath.workdps(30):
        expected = complex(mpmath.gamma(mpmath.mpc(z)))
    assert complex_gamma(z) == pytest.approx(expected, rel=1e-9)


def test_log_gamma_exponentiates_to_gamma():
    z = -2.25 + 0.5j
    assert complex(mpmath.exp(complex_log_gamma(z))) == pytest.approx(complex(mpmath.gamma(z)), rel=1e-12)


@pytest.mark.parametrize("z", [0, -1, -4])
def test_complex_gamma_poles(z):
    with pytest.raises(AtPole):
        complex_gamma(z)


def test_frak_f_is_periodic():
    r = 2 * LN2
    a = math.log(2)
    assert frak_f(r, a, 0.3) == pytest.approx(frak_f(r, a, 0.3 + r), rel=1e-12)
    with pytest.raises(ValueError):
        frak_f(r, a, 0.3, K=0)


# heat trace


def test_heat_residual_stays_bounded(dyadic, fibonacci):
    ts = np.geomspace(1e-8, 1e-2, 13)
    for g in (dyadic, fibonacci):
        sweep = heat_trace_sweep(g, ts)
        limit = heat_residual_limit(g)
        assert all(abs(r - limit) <= 1.0 for r in sweep.residual)
    assert heat_residual_limit(dyadic) == pytest.approx(-2.0)
    sweep = heat_trace_sweep(dyadic, [1e-8])
    assert sweep.residual[0] == pytest.approx(-2.0, abs=1e-4)


@pytest.mark.parametrize("fixture", ["dyadic", "fibonacci"])
def test_heat_trace_is_log_periodic(request, fixture):
    g = request.getfixturevalue(fixture)
    s0 = spectral_dimension(g)
    t = 1e-10

    def scaled(x):
        return heat_trace_direct(g, x) * x ** (s0 / 2)

    assert abs(scaled(g.rho ** 2 * t) / scaled(t) - 1) <= 1e-3


@pytest.mark.parametrize("fixture", ["dyadic", "fibonacci", "tribonacci", "ev1", "log_term"])
def test_mellin_cross_check(request, fixture):
    lhs, rhs = mellin_cross_check(request.getfixturevalue(fixture))
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_log_term_is_recovered_by_fit(log_term):
    expected = -2 / (2 * LN2)
    assert log_coefficient(log_term) == pytest.approx(expected)
    ts = np.geomspace(1e-8, 1e-4, 17)
    # remove the lambda = 4 singular part, keep the log term
    y = [heat_trace_direct(log_term, t) - (heat_trace_expansion(log_term, t) - expected * -math.log(t))
         for t in ts]
    slope, _ = np.polyfit(-np.log(ts), y, 1)
    assert slope == pytest.approx(expected, rel=0.05)


def test_no_log_term_without_unit_eigenvalue(dyadic, ev1):
    assert log_coefficient(dyadic) is None
    assert log_coefficient(ev1) == pytest.approx(0.0, abs=1e-12)


# spectral measure and states


@pytest.mark.parametrize("fixture", ["dyadic", "fibonacci", "tribonacci"])
def test_measure_is_additive(request, fixture):
    g = request.getfixturevalue(fixture)
    total = sum(spectral_measure(g, PathWord((e.id,))) for e in g.edges)
    assert total == pytest.approx(1.0, abs=1e-12)
    for n in range(1, 5):
        for path in enumerate_paths(g, n):
            children = sum(spectral_measure(g, PathWord(path + (e,))) for e in g.out_edges(g.range(path[-1])))
            assert abs(spectral_measure(g, PathWord(path)) - children) <= 1e-12


def test_measure_needs_a_word(dyadic):
    with pytest.raises(PathInvalid):
        spectral_measure(dyadic, PathWord(()))


def test_cesaro_state_matches_measure(fibonacci):
    for n in range(1, 4):
        for path in enumerate_paths(fibonacci, n):
            state = state_cesaro(fibonacci, Cylinder.indicator(path), 30)
            assert state.value.real == pytest.approx(spectral_measure(fibonacci, PathWord(path)), abs=1e-6)


def test_state_of_level_diagonal_operator(dyadic):
    result = state_cesaro(dyadic, LevelDiagonal(lambda n: 1 + 2.0 ** (-n)), 40)
    assert result.value.real == pytest.approx(1.0, abs=1e-10)
    assert result.converged


# tensor products, direct sums and resonance


def test_tensor_dimension_and_slope(dyadic, fibonacci):
    assert tensor_dimension(dyadic, fibonacci) == pytest.approx(2.0)
    ts = np.geomspace(1e-12, 1e-6, 13)
    traces = [tensor_heat_trace(dyadic, fibonacci, t) for t in ts]
    assert -2 * log_slope_fit(ts, traces) == pytest.approx(2.0, abs=0.02)


def test_tensor_trace_is_multiplicative(dyadic, fibonacci):
    t = 1e-5
    product = tensor_heat_trace(dyadic, fibonacci, t)
    assert tensor_heat_trace_double_sum(dyadic, fibonacci, t) == pytest.approx(product, rel=1e-12)


def test_direct_sum_state(dyadic, fibonacci):
    assert direct_sum_state(1.0, 3.0, 1.0, 0.0) == pytest.approx(0.25)
    with pytest.raises(BothResiduesZero):
        direct_sum_state(0.0, 0.0, 1.0, 1.0)
    c1, c2 = leading_residue(dyadic), leading_residue(fibonacci)
    assert direct_sum(dyadic, fibonacci, 1.0, 0.0) == pytest.approx(c1 / (c1 + c2))


def test_nonresonant_phase_check():
    rho, rho_prime = math.exp(-2 * math.pi), math.exp(-2 * math.pi * 0.618)
    resonant = nonresonant_phase_check(2 * math.pi * math.log(rho_prime) / math.log(rho), rho_prime, rho, kmax=20)
    assert resonant.resonant
    assert nonresonant_phase_check(math.pi, rho, rho, kmax=50).min_gap == pytest.approx(math.pi)
    assert not nonresonant_phase_check(math.pi, rho, rho, kmax=50).resonant


def _resonance_weights(phi, rho1, rho2, levels=400):
    w1 = geometric_weights(math.exp(-4 * math.log(rho1)), rho1, levels, phase=phi)
    w2 = geometric_weights(math.exp(-4 * math.log(rho2)), rho2, levels)
    one = tensor_weights(geometric_weights(math.exp(-4 * math.log(rho1)), rho1, levels), w2)
    return tensor_weights(w1, w2), one


def test_resonant_phase_has_nonzero_state():
    rho1, rho2 = math.exp(-2 * math.pi * 0.618), math.exp(-2 * math.pi)
    phi = 2 * math.pi * math.log(rho1) / math.log(rho2)
    weights, one = _resonance_weights(phi, rho1, rho2)
    assert abs(laplace_ratio_state(weights, one).value) >= 5e-2


def test_nonresonant_phase_has_vanishing_state():
    rho = math.exp(-2 * math.pi)
    weights, one = _resonance_weights(math.pi, rho, rho)
    assert abs(laplace_ratio_state(weights, one).value) <= 2e-2


def test_golden_fixture_rho(fibonacci):
    assert fibonacci.rho == pytest.approx(1 / GOLDEN)
    assert spectral_dimension(fibonacci) == pytest.approx(1.0, abs=1e-12)


def test_state_weights_of_constant_observable(dyadic):
    weights = state_weights(dyadic, LevelDiagonal(lambda n: 1.0), 40)
    assert np.allclose(weights.means, 1.0)
    assert np.allclose(weights.log_dims, np.arange(1, 41) * LN2)
    assert weights.a == pytest.approx(0.5)
    assert laplace_ratio_state(weights, weights).value == pytest.approx(1.0)


# singular graph matrix


def test_zeta_closed_keeps_the_kernel_term(rank_one):
    series, tail = zeta_series(rank_one, 3, 200)
    assert series.real == pytest.approx(0.0396 / 0.995 - 0.0036, rel=1e-12)
    assert abs(series - zeta_closed(rank_one, 3)) <= tail + 1e-12
    z = 1.2 + 0.7j
    series, tail = zeta_series(rank_one, z, 200)
    assert abs(series - zeta_closed(rank_one, z)) <= tail + 1e-12


def test_kernel_term_is_reported_and_leaves_the_poles_alone(rank_one):
    report = poles_and_residues(rank_one, kmax=1)
    assert report.entire_term.real == pytest.approx(-3.6)
    assert len(report.poles) == 3
    assert all(p.verified for p in report.poles)
    assert leading_residue(rank_one) == pytest.approx(7.92 / math.log(10))


def test_heat_residual_of_singular_matrix(rank_one):
    # zeta(0) = 39.6 / (1 - 5) - 3.6
    assert heat_residual_limit(rank_one) == pytest.approx(-13.5)
    t = 1e-6
    residual = heat_trace_direct(rank_one, t) - heat_trace_expansion(rank_one, t)
    assert residual == pytest.approx(-13.5, abs=1e-2)
