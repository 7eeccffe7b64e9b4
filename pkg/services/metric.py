"""
Spectral distance on path space.

    d(x, y) = c_xy rho^{n_xy} + sum_{n > n_xy} (b_n(x) + b_n(y)) rho^n

n_xy is the first level where x and y differ, c_xy the H-distance of the
two differing edges and b_n(z) the H-distance between z_n and the
tau-continuation of z_{n-1}. The finite approximation graph with level-n
edges of length rho^n gives an independent Dijkstra oracle.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.config import get_setting
from core.errors import DepthExceeded, DisconnectedH, PathInvalid, Unreachable
from core.utils import parallel_map
from services.graph_core import (
    TAU_EXTENDED,
    TRUNCATED,
    BratteliGraph,
    PathWord,
    enumerate_horizontal,
    enumerate_paths,
    horizontal_distance,
    tau_extend,
    tau_orbit,
    telescope,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceResult:
    value: float
    tail_bound: float
    n_xy: int  # 0 when the words agree up to depth N
    c_xy: int
    tail_exact: bool


@dataclass(frozen=True)
class LipschitzCheck:
    p: int
    c_low: float
    c_high: float
    observed_min: float
    observed_max: float
    all_pass: bool
    tight_bound: float
    tight_bound_holds: bool
    samples: int


def _extended(g: BratteliGraph, word: PathWord, N: int) -> Tuple[str, ...]:
    if len(word) > N:
        return word.edges[:N]
    return tau_extend(g, word, N).edges


def connes_distance(g: BratteliGraph, x: PathWord, y: PathWord, N: int) -> DistanceResult:
    """Closed-form distance using the levels up to N"""
    if N < 1:
        raise ValueError("connes_distance needs N >= 1")
    tail_bound = 2 * g.rho ** (N + 1) / (1 - g.rho)
    tail_exact = (x.mode == TAU_EXTENDED and y.mode == TAU_EXTENDED
                  and len(x) <= N and len(y) <= N)
    xs, ys = _extended(g, x, N), _extended(g, y, N)
    if g.source(xs[0]) != g.source(ys[0]):
        raise DisconnectedH(f"paths start at different vertices {g.source(xs[0])!r} and {g.source(ys[0])!r}")
    n_xy = next((n for n, (a, b) in enumerate(zip(xs, ys), start=1) if a != b), 0)
    if n_xy == 0:
        return DistanceResult(0.0, 0.0 if tail_exact else tail_bound, 0, 0, tail_exact)

    c_xy = horizontal_distance(g, xs[n_xy - 1], ys[n_xy - 1])
    value = c_xy * g.rho ** n_xy
    for n in range(n_xy + 1, N + 1):
        deviation = _deviation(g, xs, n) + _deviation(g, ys, n)
        if deviation:
            value += deviation * g.rho ** n
    return DistanceResult(float(value), 0.0 if tail_exact else tail_bound, n_xy, c_xy, tail_exact)


def _deviation(g: BratteliGraph, word: Sequence[str], n: int) -> int:
    # b_n: H-distance between the n-th edge and tau of the previous one
    expected = g.tau[word[n - 2]]
    return 0 if word[n - 1] == expected else horizontal_distance(g, word[n - 1], expected)


# ---------------------------------------------------------------------------
# oracle


def approximation_graph(g: BratteliGraph, N: int) -> nx.Graph:
    """Paths of length N joined by the level-n horizontal edges (n <= N), weight rho^n"""
    if N > get_setting("oracle_max_depth"):
        raise DepthExceeded(f"oracle depth {N} exceeds {get_setting('oracle_max_depth')}")
    key = ("oracle", N)
    if key in g._cache:
        return g._cache[key]
    graph = nx.Graph()
    graph.add_nodes_from(enumerate_paths(g, N))
    for n in range(1, N + 1):
        weight = g.rho ** n
        for prefix, pair in enumerate_horizontal(g, n):
            a = prefix + tuple(tau_orbit(g, pair.first, N - n + 1))
            b = prefix + tuple(tau_orbit(g, pair.second, N - n + 1))
            if not graph.has_edge(a, b) or graph[a][b]["weight"] > weight:
                graph.add_edge(a, b, weight=weight)
    logger.info("Approximation graph at depth %d: %d nodes, %d edges",
                N, graph.number_of_nodes(), graph.number_of_edges())
    g._cache[key] = graph
    return graph


def geodesic_oracle(g: BratteliGraph, x: PathWord, y: PathWord, N: int) -> float:
    """Dijkstra distance between the depth-N truncations on the approximation graph"""
    graph = approximation_graph(g, N)
    a, b = _extended(g, x, N), _extended(g, y, N)
    if a == b:
        return 0.0
    try:
        return float(nx.dijkstra_path_length(graph, a, b, weight="weight"))
    except nx.NetworkXNoPath as exc:
        raise Unreachable(f"no path between the words within depth {N}") from exc


# ---------------------------------------------------------------------------
# sampling, matrices and telescoping


def random_tau_word(g: BratteliGraph, depth: int, rng: np.random.Generator,
                    start: Optional[str] = None) -> PathWord:
    """A uniformly branching random path of the given length"""
    if depth < 1:
        raise PathInvalid("random words need depth >= 1")
    vertex = start if start is not None else g.vertices[int(rng.integers(len(g.vertices)))]
    edges = []
    for _ in range(depth):
        out = g.out_edges(vertex)
        e = out[int(rng.integers(len(out)))]
        edges.append(e)
        vertex = g.range(e)
    return PathWord(tuple(edges), TRUNCATED)


def distance_matrix(g: BratteliGraph, words: Sequence[PathWord], N: int) -> np.ndarray:
    """Symmetric matrix of closed-form distances, zero on the diagonal"""
    pairs = [(i, j) for i in range(len(words)) for j in range(i + 1, len(words))]
    values = parallel_map(lambda ij: connes_distance(g, words[ij[0]], words[ij[1]], N).value, pairs)
    out = np.zeros((len(words), len(words)))
    for (i, j), v in zip(pairs, values):
        out[i, j] = out[j, i] = v
    return out


def _group(word: PathWord, p: int) -> PathWord:
    edges = word.edges
    return PathWord(tuple(".".join(edges[k:k + p]) for k in range(0, len(edges), p)), word.mode)


def _block_ratios(g: BratteliGraph, gp: BratteliGraph, p: int) -> Tuple[float, float, float]:
    # min c/c^p, max (c + 2(p-1))/c^p and max c/c^p over pairs of telescoped edges with a common source
    lo, hi, tight = float("inf"), 0.0, 0.0
    for v in gp.vertices:
        out = gp.out_edges(v)
        for i, a in enumerate(out):
            for b in out[i + 1:]:
                pa, pb = a.split("."), b.split(".")
                if len(pa) != p:
                    pa, pb = _split_blocks(g, a, p), _split_blocks(g, b, p)
                k = next(k for k in range(p) if pa[k] != pb[k])
                c = horizontal_distance(g, pa[k], pb[k])
                cp = horizontal_distance(gp, a, b)
                lo = min(lo, c / cp)
                hi = max(hi, (c + 2 * (p - 1)) / cp)
                tight = max(tight, c / cp)
    return (1.0 if lo == float("inf") else lo), hi, tight


def _split_blocks(g: BratteliGraph, joined: str, p: int) -> List[str]:
    # edge ids may themselves contain dots; match greedily against known ids
    parts, rest = [], joined
    for _ in range(p):
        for e in sorted(g.edge_map, key=len, reverse=True):
            if rest == e or rest.startswith(e + "."):
                parts.append(e)
                rest = rest[len(e) + 1:]
                break
    return parts


def telescoping_lipschitz_check(g: BratteliGraph, p: int, samples: int, depth: int = 12,
                                seed: int = 0) -> LipschitzCheck:
    """
    Compare d on g with d on the p-telescoped graph over random pairs:
    c_low d_p <= d <= c_high d_p with
    c_low = min(1, min c/c^p) and c_high = rho^{1-p} max(p, max (c + 2(p-1))/c^p).
    """
    if p < 1:
        raise ValueError("telescoping needs p >= 1")
    rng = np.random.default_rng(seed)
    if p == 1:
        return LipschitzCheck(1, 1.0, 1.0, 1.0, 1.0, True, g.rho, True, samples)
    gp = telescope(g, p)
    lo, hi, tight = _block_ratios(g, gp, p)
    c_low = min(1.0, lo)
    c_high = g.rho ** (1 - p) * max(float(p), hi)
    tight_bound = p * g.rho ** p * tight
    ratios = []
    for _ in range(samples):
        x = random_tau_word(g, depth * p, rng)
        y = random_tau_word(g, depth * p, rng, start=g.source(x.edges[0]))
        d = connes_distance(g, x, y, depth * p).value
        dp = connes_distance(gp, _group(x, p), _group(y, p), depth).value
        if dp > 0:
            ratios.append(d / dp)
    observed_min = min(ratios, default=1.0)
    observed_max = max(ratios, default=1.0)
    slack = 1e-12
    all_pass = observed_min >= c_low * (1 - slack) and observed_max <= c_high * (1 + slack)
    tight_holds = observed_max <= tight_bound * (1 + slack)
    if not all_pass:
        logger.warning("Lipschitz sandwich failed for p=%d: observed [%g, %g] vs [%g, %g]",
                       p, observed_min, observed_max, c_low, c_high)
    return LipschitzCheck(p, c_low, c_high, observed_min, observed_max, all_pass,
                          tight_bound, tight_holds, samples)


def distance_rows(g: BratteliGraph, pairs: Sequence[Tuple[PathWord, PathWord]], N: int,
                  oracle: bool = False) -> List[Dict]:
    """Per-pair distance records for reports and CSV"""
    if oracle:
        approximation_graph(g, N)

    def row(pair):
        x, y = pair
        result = connes_distance(g, x, y, N)
        record = {
            "x": " ".join(x.edges),
            "y": " ".join(y.edges),
            "distance": result.value,
            "tail_bound": result.tail_bound,
            "n_xy": result.n_xy,
            "c_xy": result.c_xy,
        }
        if oracle:
            geodesic = geodesic_oracle(g, x, y, N)
            record["oracle"] = geodesic
            record["oracle_match"] = abs(geodesic - result.value) <= result.tail_bound + 1e-12
        return record
    return parallel_map(row, list(pairs))
