import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from core import config
from core.errors import DivisionByZero, IrrationalityViolation, NotPisot, TooLarge
from services.numberfield import (
    MinPoly,
    NumberField,
    field_arith,
    kernel_vector,
    minimal_polynomial_of_pf,
    pf_minimal_polynomial,
    pisot_analyze,
    power_phase,
    reduced_star_energy,
    star_values,
)
from tests.conftest import GOLDEN

FIBONACCI = np.array([[1, 1], [1, 0]])
TRIBONACCI = np.array([[1, 1, 1], [1, 0, 0], [0, 1, 0]])


@pytest.fixture(scope="module")
def fib_field():
    return NumberField(minimal_polynomial_of_pf(FIBONACCI))


@pytest.fixture(scope="module")
def trib_field():
    return NumberField(minimal_polynomial_of_pf(TRIBONACCI))


def test_fibonacci_minimal_polynomial(fib_field):
    assert fib_field.minpoly == MinPoly((1, -1, -1))
    pd = fib_field.data
    assert pd.theta == pytest.approx(GOLDEN, abs=1e-12)
    assert pd.conjugates[1].real == pytest.approx((1 - math.sqrt(5)) / 2, abs=1e-12)
    assert pd.pisot and pd.unimodular
    assert pd.L == 2
    assert pd.phases[0] == pytest.approx(math.pi)


def test_tribonacci_conjugates(trib_field):
    pd = trib_field.data
    assert pd.minpoly == MinPoly((1, -1, -1, -1))
    with mpmath.workdps(40):
        roots = mpmath.polyroots([1, -1, -1, -1])
    small = min(abs(complex(r)) for r in roots)
    assert pd.theta2_modulus == pytest.approx(small, abs=1e-12)
    assert pd.L == 3
    assert pd.pisot and pd.unimodular


def test_non_unimodular_and_non_pisot():
    pd = pisot_analyze(minimal_polynomial_of_pf(np.array([[2, 2], [1, 0]])))
    assert pd.pisot
    assert not pd.unimodular
    assert not pisot_analyze(MinPoly((1, -1, -3))).pisot


def test_root_of_pf():
    mp = pf_minimal_polynomial(FIBONACCI, d=2)
    assert mp == MinPoly((1, 0, -1, 0, -1))
    # -sqrt(golden) is a conjugate outside the unit disc
    assert not pisot_analyze(mp).pisot


def test_rational_dilation_is_refused():
    with pytest.raises(IrrationalityViolation):
        minimal_polynomial_of_pf(np.array([[1, 1], [1, 1]]))


def test_field_degree_limit(monkeypatch):
    monkeypatch.setitem(config.DEFAULT_SETTINGS, "max_field_degree", 2)
    with pytest.raises(TooLarge):
        minimal_polynomial_of_pf(TRIBONACCI)


def test_minpoly_must_be_monic():
    with pytest.raises(ValueError):
        MinPoly((2, 1))


# arithmetic


def test_golden_relation(fib_field):
    theta = fib_field.gen
    assert theta * theta == theta + 1
    assert theta.inverse() == theta - 1
    assert (theta ** -3) * theta ** 3 == fib_field.one
    assert float(theta ** 5) == pytest.approx(GOLDEN ** 5)


def test_field_arith_dispatch(trib_field):
    a = trib_field.element([1, 2, 0])
    b = trib_field.element([0, Fraction(1, 2), 3])
    assert field_arith(a, b, "+") == a + b
    assert field_arith(a, b, "-") == a - b
    assert field_arith(a, b, "*") == b * a
    assert field_arith(a, None, "inverse") * a == trib_field.one
    with pytest.raises(ValueError):
        field_arith(a, b, "%")


def test_zero_has_no_inverse(fib_field):
    with pytest.raises(DivisionByZero):
        fib_field.zero.inverse()
    with pytest.raises(DivisionByZero):
        fib_field.one / fib_field.zero


def test_elements_of_different_fields_do_not_mix(fib_field, trib_field):
    with pytest.raises(ValueError):
        fib_field.one + trib_field.one


def test_power_traces(fib_field, trib_field):
    # Lucas numbers and tribonacci power sums
    assert [fib_field.power_trace(k) for k in range(4)] == [2, 1, 3, 4]
    assert [trib_field.power_trace(k) for k in range(4)] == [3, 1, 3, 7]


def test_trace_of_algebraic_integers_is_integral(trib_field):
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = trib_field.element([int(c) for c in rng.integers(-9, 10, size=3)])
        tr = p.trace()
        assert tr.denominator == 1
        assert sum(p.embeddings()).real == pytest.approx(float(tr), abs=1e-9)
        assert p.frac_phase() == 0


def test_trace_of_rational_element(fib_field):
    p = fib_field.element([Fraction(1, 3), Fraction(1, 2)])
    assert p.trace() == Fraction(2, 3) + Fraction(1, 2)
    assert p.frac_phase() == Fraction(1, 6)


# star map


def test_star_values(fib_field, trib_field):
    sv = star_values(fib_field.one, fib_field.data)
    assert sv.full == pytest.approx(1.0)
    assert sv.reduced == pytest.approx(1.0)
    theta = trib_field.data.theta
    sv = star_values(trib_field.gen, trib_field.data)
    assert sv.full.real == pytest.approx(1 - theta, abs=1e-12)
    assert sv.full == pytest.approx(sv.reduced)


def test_reduced_star_energy(trib_field):
    # |theta_2|^2 theta = 1 for the tribonacci number
    expected = 2 / trib_field.data.theta
    assert reduced_star_energy(trib_field.gen, trib_field.data) == pytest.approx(expected, rel=1e-12)


def test_star_map_needs_pisot():
    field = NumberField(MinPoly((1, -1, -3)))
    with pytest.raises(NotPisot):
        star_values(field.one, field.data)
    with pytest.raises(NotPisot):
        reduced_star_energy(field.gen, field.data)


@pytest.mark.parametrize("n", [5, 10, 20, 40])
def test_power_phase_of_golden_ratio(fib_field, n):
    theta2 = (1 - math.sqrt(5)) / 2
    expected = (-(theta2 ** n)) % 1.0
    assert power_phase(fib_field.one, n) == pytest.approx(expected, abs=1e-12)


def test_power_phase_matches_floats_for_small_n(fib_field):
    assert power_phase(fib_field.one, 7) == pytest.approx((GOLDEN ** 7) % 1.0, abs=1e-12)


def test_kernel_vector(fib_field):
    theta = fib_field.gen
    vec = kernel_vector([[fib_field.one, -theta]])
    assert vec == [theta, fib_field.one]
    with pytest.raises(ValueError):
        kernel_vector([[fib_field.one, fib_field.zero], [fib_field.zero, fib_field.one]])
