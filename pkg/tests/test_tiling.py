import cmath
import math

import pytest

from core.errors import GraphSpecError, NotPisot, ParameterMismatch
from services.graph_core import PathWord, enumerate_paths, with_rho
from services.numberfield import FieldElement
from services.spec_loader import load_rules
from services.tiling import (
    TileFunction,
    beta_from_return_value,
    build_substitution,
    dirichlet_parameters,
    eigen_observable,
    exact_frequencies,
    exact_lengths,
    horizontal_geometry,
    laplacian_eigenvalue,
    letter_frequencies,
    lg_form_closed,
    longitudinal_graph,
    micro_position,
    omega_slope,
    omega_triple,
    path_offset,
    q_lg_numeric,
    q_lg_sequence,
    q_tr_numeric,
    substitution_matrix,
    supertile_offsets,
    tile_position,
)
from tests.conftest import GOLDEN

THETA2 = (1 - math.sqrt(5)) / 2
FIB_LA = (2 * GOLDEN + 1) / (GOLDEN + 2)


@pytest.fixture(scope="module")
def fib_geometry(fib_sub):
    spec = load_rules("fibonacci")
    lg = longitudinal_graph(fib_sub, horizontal=spec.horizontal_lg)
    return horizontal_geometry(fib_sub, lg_graph=lg)


@pytest.fixture(scope="module")
def fib_beta(fib_sub, fib_geometry):
    return beta_from_return_value(fib_sub, fib_geometry, [0, 1])


def test_substitution_matrix():
    assert substitution_matrix(("a", "b"), {"a": "ab", "b": "a"}).tolist() == [[1, 1], [1, 0]]
    assert substitution_matrix(("a", "b"), {"a": "abb", "b": "a"}).tolist() == [[1, 1], [2, 0]]


def test_bad_rules_are_rejected():
    with pytest.raises(GraphSpecError):
        build_substitution({"a": "ac", "b": "a"})
    with pytest.raises(GraphSpecError):
        build_substitution({"a": "ab", "b": ""})


def test_fibonacci_lengths_and_frequencies(fib_sub):
    assert fib_sub.theta == pytest.approx(GOLDEN, abs=1e-12)
    assert fib_sub.L == pytest.approx([FIB_LA, FIB_LA / GOLDEN], abs=1e-12)
    assert fib_sub.R == pytest.approx([1 / GOLDEN, 1 / GOLDEN ** 2], abs=1e-12)
    assert float(fib_sub.R @ fib_sub.L) == pytest.approx(1.0, abs=1e-12)
    theta = fib_sub.theta_exact
    assert theta * fib_sub.lengths["a"] == fib_sub.lengths["a"] + fib_sub.lengths["b"]
    assert theta * fib_sub.lengths["b"] == fib_sub.lengths["a"]


def test_measured_frequencies_approach_exact_ones(fib_sub):
    measured = letter_frequencies(fib_sub, "a", 25)
    assert measured["a"] == pytest.approx(1 / GOLDEN, abs=1e-9)
    assert measured["b"] == pytest.approx(1 / GOLDEN ** 2, abs=1e-9)


def test_supertile_layout(fib_sub):
    tiles = supertile_offsets(fib_sub, "a", 3)
    assert "".join(v for v, _ in tiles) == "abaab"
    positions = [float(x) for _, x in tiles]
    assert positions == sorted(positions)
    last_letter, last = tiles[-1]
    assert last + fib_sub.lengths[last_letter] == fib_sub.theta_exact ** 3 * fib_sub.lengths["a"]


def test_path_offset(fib_sub):
    assert path_offset(fib_sub, ["b.0", "a.1"]) == fib_sub.theta_exact * fib_sub.lengths["a"]
    assert path_offset(fib_sub, ["a.0", "a.0"]).is_zero()


def test_tile_positions_rebuild_the_supertile(fib_sub):
    g = fib_sub.graph
    paths = [p for p in enumerate_paths(g, 3) if g.range(p[-1]) == "a"]
    placed = sorted((float(tile_position(fib_sub, p)), g.source(p[0])) for p in paths)
    layout = [(float(x), v) for v, x in supertile_offsets(fib_sub, "a", 3)]
    assert [v for _, v in placed] == [v for _, v in layout]
    assert [x for x, _ in placed] == pytest.approx([x for x, _ in layout], abs=1e-12)
    assert tile_position(fib_sub, ("b.0", "a.1")) == path_offset(fib_sub, ["b.0", "a.1"])


def test_return_and_microtile_vectors(fib_sub, fib_geometry):
    first = fib_geometry.returns[0]
    assert (first.pair.first, first.pair.second) == ("a.0", "b.0")
    assert first.depth == 2
    assert first.vector == fib_sub.theta_exact * fib_sub.lengths["a"]
    assert fib_geometry.returns[1].vector == -first.vector
    micro = fib_geometry.microtiles[0]
    assert micro.vector == fib_sub.lengths["a"]
    assert fib_geometry.c_tr == pytest.approx(1 / (2 * FIB_LA))
    assert fib_geometry.c_lg == pytest.approx(GOLDEN / 2)
    assert fib_geometry.K == pytest.approx(2 * FIB_LA ** 2 / GOLDEN)


def test_beta_from_return_value(fib_sub, fib_beta):
    assert isinstance(fib_beta, FieldElement)
    assert fib_beta * fib_sub.lengths["a"] == fib_sub.field.one


def test_laplacian_eigenvalues_closed_forms(fib_sub, fib_geometry, fib_beta):
    four_pi2 = (2 * math.pi) ** 2
    assert laplacian_eigenvalue(fib_sub, fib_geometry, fib_beta, "lg") == pytest.approx(-four_pi2)
    expected_tr = -four_pi2 / (GOLDEN ** 3 * FIB_LA)
    assert laplacian_eigenvalue(fib_sub, fib_geometry, fib_beta, "tr") == pytest.approx(expected_tr, rel=1e-10)
    with pytest.raises(ValueError):
        laplacian_eigenvalue(fib_sub, fib_geometry, fib_beta, "both")


@pytest.mark.parametrize("value", [[0, 1], [1, 1], [1]])
def test_eigenvalues_are_negative_and_quadratic_in_beta(fib_sub, fib_geometry, value):
    beta = beta_from_return_value(fib_sub, fib_geometry, value)
    for which in ("tr", "lg"):
        lam = laplacian_eigenvalue(fib_sub, fib_geometry, beta, which)
        assert lam < 0
        assert laplacian_eigenvalue(fib_sub, fib_geometry, beta * 2, which) == pytest.approx(4 * lam, rel=1e-12)


def test_transversal_form_matches_eigenvalue(fib_sub, fib_geometry, fib_beta):
    check = q_tr_numeric(fib_sub, fib_geometry, fib_beta, (20, 40))
    assert check.relative_error <= 0.01
    assert check.expected == pytest.approx(-laplacian_eigenvalue(fib_sub, fib_geometry, fib_beta, "tr"))
    assert len(check.values) == 21


def test_tribonacci_transversal_form_matches_eigenvalue(trib_sub):
    params = dirichlet_parameters(trib_sub, kmax=100)
    tr = with_rho(trib_sub.graph, params.rho_tr)
    geo = horizontal_geometry(trib_sub, tr, longitudinal_graph(trib_sub, params.rho_lg))
    for value in ([0, 1], [1]):
        beta = beta_from_return_value(trib_sub, geo, value)
        check = q_tr_numeric(trib_sub, geo, beta, (20, 80), params.rho_tr)
        assert check.relative_error <= 0.05
        assert check.expected == pytest.approx(-laplacian_eigenvalue(trib_sub, geo, beta, "tr"))


def test_transversal_form_rejects_wrong_rho(fib_sub, fib_geometry, fib_beta):
    with pytest.raises(ParameterMismatch):
        q_tr_numeric(fib_sub, fib_geometry, fib_beta, rho_tr=0.5)


def test_longitudinal_form_of_linear_function_is_exact(fib_sub, fib_geometry):
    f = TileFunction.linear(1.0)
    check = q_lg_numeric(fib_sub, fib_geometry, f, f, n=12)
    assert check.numeric == pytest.approx(FIB_LA ** 2, rel=1e-9)
    assert check.closed_form == pytest.approx(FIB_LA ** 2, rel=1e-9)


@pytest.mark.parametrize("f", [
    TileFunction.sine(4 * FIB_LA),
    TileFunction(lambda x: x * x, lambda x: 2 * x),
    TileFunction(lambda x: math.exp(-x), lambda x: -math.exp(-x)),
])
def test_longitudinal_form_matches_closed_form(fib_sub, fib_geometry, f):
    check = q_lg_numeric(fib_sub, fib_geometry, f, f, n=18)
    assert check.relative_error <= 0.02


def test_longitudinal_form_of_constant_vanishes(fib_sub, fib_geometry):
    c = TileFunction.constant(3.0)
    assert q_lg_sequence(fib_sub, fib_geometry, c, c, [4, 8]) == [0.0, 0.0]
    assert lg_form_closed(fib_sub, fib_geometry, c, c) == 0.0


@pytest.mark.parametrize("shift", [-0.05, 0.0, 0.05])
def test_longitudinal_scaling_trichotomy(fib_sub, fib_geometry, shift):
    f = TileFunction.linear(1.0)
    rho = 1 / GOLDEN + shift
    ns = [4, 12, 20]
    values = q_lg_sequence(fib_sub, fib_geometry, f, f, ns, rho_lg=rho)
    assert values == pytest.approx([FIB_LA ** 2 * (GOLDEN * rho) ** (-2 * n) for n in ns], rel=1e-9)
    if shift > 0:
        assert values[0] > values[1] > values[2] and values[2] < 0.1 * FIB_LA ** 2
    elif shift < 0:
        assert values[0] < values[1] < values[2] and values[2] > 10 * FIB_LA ** 2
    else:
        assert values == pytest.approx([FIB_LA ** 2] * 3, rel=1e-9)


def test_longitudinal_form_rejects_wrong_rho(fib_sub, fib_geometry):
    f = TileFunction.linear(1.0)
    with pytest.raises(ParameterMismatch):
        q_lg_numeric(fib_sub, fib_geometry, f, f, rho_lg=0.5)


# Pisot pipeline


def test_fibonacci_parameters(fib_sub):
    params = dirichlet_parameters(fib_sub)
    assert params.rho_tr == pytest.approx(abs(THETA2))
    assert params.rho_lg == pytest.approx(1 / GOLDEN)
    assert params.nonresonant
    assert params.verdict.startswith("vacuous")


def test_tribonacci_phases_are_non_resonant(trib_sub):
    params = dirichlet_parameters(trib_sub, kmax=1000)
    assert params.pisot.L == 3
    assert params.nonresonant
    assert params.min_gap > 0.5


def test_thue_morse_is_not_pisot():
    spec = load_rules("thue_morse")
    sub = build_substitution(spec.rules, spec.alphabet, star_edge=spec.star_edge)
    assert sub.theta == pytest.approx(2.0)
    with pytest.raises(NotPisot):
        dirichlet_parameters(sub)


# the triple on the hull


def test_fibonacci_omega_triple(fib_sub):
    omega = omega_triple(fib_sub)
    assert omega.s_tr == pytest.approx(1.0, abs=1e-12)
    assert omega.s_lg == pytest.approx(1.0, abs=1e-12)
    assert omega.s0 == pytest.approx(omega.s_tr + omega.s_lg)
    assert omega.residue.resonant and omega.residue.ratio == (1, 1)
    assert omega.residue.positive
    assert omega_slope(omega) == pytest.approx(2.0, abs=0.02)


def test_tribonacci_omega_triple(trib_sub):
    omega = omega_triple(trib_sub)
    assert omega.s_tr == pytest.approx(2.0, abs=1e-9)
    assert omega.s_lg == pytest.approx(1.0, abs=1e-12)
    assert omega.s0 == pytest.approx(3.0, abs=1e-9)
    assert omega.residue.ratio == (1, 2)
    assert omega.residue.positive


def test_exact_data_are_copies(fib_sub):
    lengths = exact_lengths(fib_sub)
    assert lengths == dict(fib_sub.lengths)
    lengths["a"] = fib_sub.field.zero
    assert not fib_sub.lengths["a"].is_zero()
    assert sum(exact_frequencies(fib_sub).values(), fib_sub.field.zero) == fib_sub.field.one


def test_microtile_positions(fib_sub, fib_geometry):
    lg = fib_geometry.longitudinal
    assert micro_position(fib_sub, ["a.0"], lg).is_zero()
    assert micro_position(fib_sub, ["a.1"], lg) == fib_sub.lengths["b"]
    assert micro_position(fib_sub, ["a.1", "b.0"], lg) == fib_sub.lengths["b"]


def test_eigen_observable_phase(fib_sub, fib_beta):
    obs = eigen_observable(fib_sub, fib_beta, 3)
    value = obs.evaluate(fib_sub.graph, PathWord(("b.0", "a.1", "a.0")))
    assert value == pytest.approx(cmath.exp(2j * math.pi * (GOLDEN % 1.0)), abs=1e-12)
