import numpy as np
import pytest

from core.errors import DepthExceeded, DisconnectedH, PathInvalid
from services.graph_core import TAU_EXTENDED, build_graph, path_word
from services.metric import (
    approximation_graph,
    connes_distance,
    distance_matrix,
    distance_rows,
    geodesic_oracle,
    random_tau_word,
    telescoping_lipschitz_check,
)
from services.spec_loader import load_pairs
from tests.conftest import fibonacci_spec

DEPTH = 12


def word(g, text):
    return path_word(g, text.split(), TAU_EXTENDED)


@pytest.mark.parametrize("x, y, expected", [
    ("1 0", "0", 0.5),
    ("1 1 0", "0", 0.75),
    ("0", "0", 0.0),
    ("0 1", "0", 0.25),
])
def test_dyadic_distances(dyadic, x, y, expected):
    result = connes_distance(dyadic, word(dyadic, x), word(dyadic, y), DEPTH)
    assert result.value == pytest.approx(expected, abs=1e-15)
    assert result.tail_exact
    assert result.tail_bound == 0.0


def test_first_difference_and_hop_count(dyadic):
    result = connes_distance(dyadic, word(dyadic, "0 1"), word(dyadic, "0"), DEPTH)
    assert (result.n_xy, result.c_xy) == (2, 1)


def test_bundled_pairs_file(dyadic):
    pairs = load_pairs("dyadic_pairs", dyadic)
    rows = distance_rows(dyadic, pairs, DEPTH, oracle=True)
    assert [r["distance"] for r in rows] == pytest.approx([0.5, 0.75, 0.0, 0.25])
    assert all(r["oracle_match"] for r in rows)
    assert rows[0]["x"] == "1 0"


def _random_pairs(g, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        x = random_tau_word(g, DEPTH, rng)
        yield x, random_tau_word(g, DEPTH, rng, start=g.source(x.edges[0]))


@pytest.mark.parametrize("fixture", ["dyadic", "fibonacci"])
def test_closed_form_matches_geodesic_oracle(request, fixture):
    g = request.getfixturevalue(fixture)
    for x, y in _random_pairs(g, 200, seed=5):
        result = connes_distance(g, x, y, DEPTH)
        assert abs(geodesic_oracle(g, x, y, DEPTH) - result.value) <= result.tail_bound + 1e-12


@pytest.mark.parametrize("fixture", ["dyadic", "fibonacci"])
def test_triangle_inequality(request, fixture):
    g = request.getfixturevalue(fixture)
    rng = np.random.default_rng(17)
    tail = 2 * g.rho ** (DEPTH + 1) / (1 - g.rho)
    for _ in range(200):
        x = random_tau_word(g, DEPTH, rng, start=g.star_vertex)
        y = random_tau_word(g, DEPTH, rng, start=g.star_vertex)
        z = random_tau_word(g, DEPTH, rng, start=g.star_vertex)
        dxz = connes_distance(g, x, z, DEPTH).value
        dxy = connes_distance(g, x, y, DEPTH).value
        dyz = connes_distance(g, y, z, DEPTH).value
        assert dxz <= dxy + dyz + 3 * tail


def test_distance_matrix_is_symmetric(fibonacci):
    rng = np.random.default_rng(3)
    words = [random_tau_word(fibonacci, 8, rng, start="a") for _ in range(6)]
    m = distance_matrix(fibonacci, words, 8)
    assert np.allclose(m, m.T)
    assert np.all(np.diag(m) == 0)
    assert np.all(m >= 0)


def test_telescoping_lipschitz_sandwich(dyadic, fibonacci):
    for g in (dyadic, fibonacci):
        check = telescoping_lipschitz_check(g, 2, samples=100, depth=6)
        assert check.all_pass
        assert check.c_low <= check.observed_min <= check.observed_max <= check.c_high


def test_tighter_constant_fails_on_dyadic(dyadic):
    check = telescoping_lipschitz_check(dyadic, 2, samples=100, depth=6)
    assert check.tight_bound == pytest.approx(0.5)
    assert not check.tight_bound_holds


def test_trivial_telescoping(dyadic):
    check = telescoping_lipschitz_check(dyadic, 1, samples=10)
    assert check.all_pass and check.c_low == check.c_high == 1.0


def test_words_from_different_vertices(fibonacci):
    with pytest.raises(DisconnectedH):
        connes_distance(fibonacci, word(fibonacci, "ba"), word(fibonacci, "aa"), DEPTH)


def test_missing_horizontal_edges():
    g = build_graph(fibonacci_spec(horizontal=[]))
    with pytest.raises(DisconnectedH):
        connes_distance(g, word(g, "aa"), word(g, "ab"), DEPTH)


def test_oracle_depth_limit(dyadic):
    with pytest.raises(DepthExceeded):
        approximation_graph(dyadic, 15)


def test_argument_checks(dyadic):
    with pytest.raises(ValueError):
        connes_distance(dyadic, word(dyadic, "0"), word(dyadic, "1"), 0)
    with pytest.raises(PathInvalid):
        random_tau_word(dyadic, 0, np.random.default_rng(0))
