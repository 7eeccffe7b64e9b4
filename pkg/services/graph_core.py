"""
Stationary Bratteli diagrams: the graph with its star loop, the choice
function tau, the oriented horizontal edges H and the parameter rho.

Paths are sequences of edge ids with range(e_i) == source(e_{i+1}).  A
level-n horizontal edge of the approximation graph is a pair
(eta + eps, eta + eps') where eta is a common path of length n-1 and
(eps, eps') belongs to H.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.errors import (
    DisconnectedH,
    GraphSpecError,
    HorizontalInvalid,
    NonPrimitive,
    PathInvalid,
    RhoOutOfRange,
    TauInvalid,
)

logger = logging.getLogger(__name__)

TRUNCATED = "truncated"
TAU_EXTENDED = "tau_extended"


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    range: str


@dataclass(frozen=True)
class HorizontalPair:
    first: str
    second: str
    orientation: str  # "+" or "-"


@dataclass(frozen=True)
class PathWord:
    edges: Tuple[str, ...]
    mode: str = TRUNCATED

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class PrimitivityResult:
    primitive: bool
    witness: Optional[int]
    certificate: str


@dataclass(frozen=True)
class BratteliGraph:
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    star_edge: str
    tau: Mapping[str, str]
    horizontal: Tuple[HorizontalPair, ...]
    rho: float
    _cache: Dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def edge_map(self) -> Dict[str, Edge]:
        if "edge_map" not in self._cache:
            self._cache["edge_map"] = {e.id: e for e in self.edges}
        return self._cache["edge_map"]

    @property
    def vertex_index(self) -> Dict[str, int]:
        if "vertex_index" not in self._cache:
            self._cache["vertex_index"] = {v: i for i, v in enumerate(self.vertices)}
        return self._cache["vertex_index"]

    @property
    def star_vertex(self) -> str:
        return self.edge_map[self.star_edge].source

    def source(self, edge_id: str) -> str:
        return self.edge_map[edge_id].source

    def range(self, edge_id: str) -> str:
        return self.edge_map[edge_id].range

    def out_edges(self, vertex: str) -> List[str]:
        key = ("out", vertex)
        if key not in self._cache:
            self._cache[key] = [e.id for e in self.edges if e.source == vertex]
        return self._cache[key]

    def horizontal_by_source(self) -> Dict[str, List[HorizontalPair]]:
        """Ordered H pairs grouped by their common source vertex"""
        if "h_by_source" not in self._cache:
            grouped: Dict[str, List[HorizontalPair]] = {v: [] for v in self.vertices}
            for pair in self.horizontal:
                grouped[self.source(pair.first)].append(pair)
            self._cache["h_by_source"] = grouped
        return self._cache["h_by_source"]

    def to_spec(self) -> Dict:
        """Serialize back to the JSON graph-spec layout"""
        return {
            "vertices": list(self.vertices),
            "edges": [[e.id, e.source, e.range] for e in self.edges],
            "star_edge": self.star_edge,
            "tau": {e.id: self.tau[e.id] for e in self.edges},
            "horizontal": [[h.first, h.second, h.orientation] for h in self.horizontal],
            "rho": self.rho,
        }


# ---------------------------------------------------------------------------
# matrices and primitivity


def graph_matrix(g: BratteliGraph) -> np.ndarray:
    """A[v, w] = number of edges with source v and range w"""
    index = g.vertex_index
    A = np.zeros((len(g.vertices), len(g.vertices)), dtype=np.int64)
    for e in g.edges:
        A[index[e.source], index[e.range]] += 1
    return A


def is_primitive(A: np.ndarray) -> PrimitivityResult:
    """Smallest N within Wielandt's bound with A^N > 0, or a failure certificate"""
    A = np.asarray(A)
    dim = A.shape[0]
    if dim == 0 or A.shape[0] != A.shape[1]:
        return PrimitivityResult(False, None, "matrix must be square and non-empty")
    if (A < 0).any():
        return PrimitivityResult(False, None, "matrix has negative entries")
    pattern = (A > 0).astype(np.int64)
    power = pattern.copy()
    bound = (dim - 1) * dim + 1
    for n in range(1, bound + 1):
        if power.all():
            return PrimitivityResult(True, n, "")
        power = ((power @ pattern) > 0).astype(np.int64)
    zeros = np.argwhere(power == 0)
    v, w = (int(x) for x in zeros[0])
    return PrimitivityResult(
        False, None,
        f"entry ({v}, {w}) of A^N stays zero for every N up to the bound {bound}",
    )


def path_count(A: np.ndarray, n: int) -> np.ndarray:
    """Exact big-integer matrix power A^n (object dtype)"""
    if n < 0:
        raise ValueError("path_count requires n >= 0")
    base = np.array(np.asarray(A).tolist(), dtype=object)
    result = np.identity(base.shape[0], dtype=np.int64).astype(object)
    while n:
        if n & 1:
            result = result.dot(base)
        base = base.dot(base)
        n >>= 1
    return result


def horizontal_count(g: BratteliGraph, n: int) -> int:
    """#E_n = sum over v and h in H of (A^{n-1})[v, s^2(h)]"""
    if n < 1:
        raise ValueError("horizontal_count requires n >= 1")
    column_sums = np.ones(len(g.vertices), dtype=np.int64).astype(object).dot(
        path_count(graph_matrix(g), n - 1)
    )
    index = g.vertex_index
    return int(sum(column_sums[index[g.source(h.first)]] for h in g.horizontal))


# ---------------------------------------------------------------------------
# tau and horizontal defaults


def star_distances(vertices: Sequence[str], edges: Sequence[Edge], star_vertex: str) -> Dict[str, int]:
    """Directed distance from each vertex to the star vertex"""
    incoming: Dict[str, List[str]] = {v: [] for v in vertices}
    for e in edges:
        incoming[e.range].append(e.source)
    dist = {star_vertex: 0}
    queue = deque([star_vertex])
    while queue:
        v = queue.popleft()
        for u in incoming[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def default_tau(vertices: Sequence[str], edges: Sequence[Edge], star_edge: str) -> Dict[str, str]:
    """Choice function heading to the star vertex; ties broken by declaration order"""
    by_id = {e.id: e for e in edges}
    star_vertex = by_id[star_edge].source
    dist = star_distances(vertices, edges, star_vertex)
    tau: Dict[str, str] = {}
    for e in edges:
        if e.range == star_vertex:
            tau[e.id] = star_edge
            continue
        candidates = [
            (dist.get(c.range, len(vertices) + 1), pos, c.id)
            for pos, c in enumerate(edges)
            if c.source == e.range
        ]
        if not candidates:
            raise TauInvalid(f"vertex {e.range!r} has no outgoing edge")
        tau[e.id] = min(candidates)[2]
    return tau


def maximal_horizontal(vertices: Sequence[str], edges: Sequence[Edge]) -> Tuple[HorizontalPair, ...]:
    """All ordered pairs of distinct edges with a common source; '+' when the first is declared earlier"""
    pairs = []
    for v in vertices:
        out = [e.id for e in edges if e.source == v]
        for i, a in enumerate(out):
            for j, b in enumerate(out):
                if i != j:
                    pairs.append(HorizontalPair(a, b, "+" if i < j else "-"))
    return tuple(pairs)


# ---------------------------------------------------------------------------
# construction and validation


def build_graph(spec: Mapping) -> BratteliGraph:
    """
    Build and validate a graph from its structured description.

    Missing 'tau' and 'horizontal' keys fall back to default_tau and
    maximal_horizontal. All violations are collected; the first one's
    error class is raised carrying the full list.
    """
    try:
        vertices = tuple(str(v) for v in spec["vertices"])
        edges = tuple(_parse_edge(e) for e in spec["edges"])
        star_edge = str(spec["star_edge"])
        rho = float(spec["rho"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphSpecError(f"graph spec does not parse: {exc}") from exc

    problems: List[Tuple[type, str]] = []
    vertex_set = set(vertices)
    if len(vertex_set) != len(vertices):
        problems.append((GraphSpecError, "duplicate vertex ids"))
    ids = [e.id for e in edges]
    if len(set(ids)) != len(ids):
        problems.append((GraphSpecError, "duplicate edge ids"))
    for e in edges:
        if e.source not in vertex_set or e.range not in vertex_set:
            problems.append((GraphSpecError, f"edge {e.id!r} references an unknown vertex"))
    by_id = {e.id: e for e in edges}
    if star_edge not in by_id:
        problems.append((GraphSpecError, f"star edge {star_edge!r} is not an edge"))
    elif by_id[star_edge].source != by_id[star_edge].range:
        problems.append((GraphSpecError, f"star edge {star_edge!r} is not a loop"))
    if problems:
        _raise_collected(problems)

    if not 0.0 < rho < 1.0:
        problems.append((RhoOutOfRange, f"rho={rho} is outside (0, 1)"))

    graph_stub = BratteliGraph(vertices, edges, star_edge, {}, (), 0.5)
    primitivity = is_primitive(graph_matrix(graph_stub))
    if not primitivity.primitive:
        problems.append((NonPrimitive, f"graph matrix is not primitive: {primitivity.certificate}"))

    raw_tau = spec.get("tau")
    if raw_tau is None:
        try:
            tau = default_tau(vertices, edges, star_edge)
        except TauInvalid as exc:
            problems.append((TauInvalid, exc.message))
            tau = {}
    else:
        tau = {str(k): str(v) for k, v in dict(raw_tau).items()}
    problems.extend((TauInvalid, msg) for msg in _tau_violations(vertices, edges, star_edge, tau))

    raw_h = spec.get("horizontal")
    if raw_h is None:
        horizontal = maximal_horizontal(vertices, edges)
    else:
        try:
            horizontal = tuple(_parse_pair(h) for h in raw_h)
        except (TypeError, ValueError, IndexError) as exc:
            raise GraphSpecError(f"horizontal edges do not parse: {exc}") from exc
    problems.extend((HorizontalInvalid, msg) for msg in _horizontal_violations(by_id, horizontal))

    if problems:
        _raise_collected(problems)
    graph = BratteliGraph(vertices, edges, star_edge, dict(tau), horizontal, rho)
    logger.info("Built graph with %d vertices, %d edges, |H|=%d, rho=%g",
                len(vertices), len(edges), len(horizontal), rho)
    return graph


def _parse_edge(raw) -> Edge:
    if isinstance(raw, Mapping):
        return Edge(str(raw["id"]), str(raw["source"]), str(raw["range"]))
    edge_id, source, rng = raw
    return Edge(str(edge_id), str(source), str(rng))


def _parse_pair(raw) -> HorizontalPair:
    if isinstance(raw, Mapping):
        first, second, orientation = raw["from"], raw["to"], raw.get("orientation", "+")
    else:
        first, second, orientation = raw
    return HorizontalPair(str(first), str(second), str(orientation))


def _raise_collected(problems: List[Tuple[type, str]]) -> None:
    error_class, message = problems[0]
    raise error_class(message, violations=[msg for _, msg in problems])


def _tau_violations(vertices, edges, star_edge, tau) -> List[str]:
    by_id = {e.id: e for e in edges}
    if star_edge not in by_id:
        return []
    star_vertex = by_id[star_edge].source
    dist = star_distances(vertices, edges, star_vertex)
    out = []
    for e in edges:
        target = tau.get(e.id)
        if target is None or target not in by_id:
            out.append(f"tau is undefined or unknown for edge {e.id!r}")
            continue
        if e.range == star_vertex:
            if target != star_edge:
                out.append(f"tau({e.id}) must be the star edge since its range is the star vertex")
            continue
        chosen = by_id[target]
        if chosen.source != e.range:
            out.append(f"tau({e.id})={target} does not start at range({e.id})={e.range}")
        elif dist.get(chosen.range, float("inf")) >= dist.get(e.range, float("inf")):
            out.append(f"tau({e.id})={target} does not get closer to the star vertex")
    return out


def _horizontal_violations(by_id: Mapping[str, Edge], horizontal: Sequence[HorizontalPair]) -> List[str]:
    out = []
    seen = {}
    for h in horizontal:
        if h.first not in by_id or h.second not in by_id:
            out.append(f"horizontal pair ({h.first}, {h.second}) references an unknown edge")
            continue
        if h.first == h.second:
            out.append(f"horizontal pair ({h.first}, {h.second}) is a loop")
        if by_id[h.first].source != by_id[h.second].source:
            out.append(f"horizontal pair ({h.first}, {h.second}) has different sources")
        if h.orientation not in ("+", "-"):
            out.append(f"horizontal pair ({h.first}, {h.second}) has orientation {h.orientation!r}")
        if (h.first, h.second) in seen:
            out.append(f"horizontal pair ({h.first}, {h.second}) is listed twice")
        seen[(h.first, h.second)] = h.orientation
    for (a, b), orientation in seen.items():
        back = seen.get((b, a))
        if back is None:
            out.append(f"horizontal pair ({a}, {b}) has no reverse ({b}, {a})")
        elif back == orientation and orientation in ("+", "-"):
            out.append(f"horizontal pairs ({a}, {b}) and ({b}, {a}) share orientation {orientation!r}")
    return out


def with_rho(g: BratteliGraph, rho: float) -> BratteliGraph:
    """Copy of g with another rho"""
    if not 0.0 < rho < 1.0:
        raise RhoOutOfRange(f"rho={rho} is outside (0, 1)")
    return replace(g, rho=float(rho), _cache={})


# ---------------------------------------------------------------------------
# paths


def path_word(g: BratteliGraph, edges: Sequence[str], mode: str = TRUNCATED) -> PathWord:
    """Validated path word"""
    if mode not in (TRUNCATED, TAU_EXTENDED):
        raise PathInvalid(f"unknown path mode {mode!r}")
    edges = tuple(str(e) for e in edges)
    for e in edges:
        if e not in g.edge_map:
            raise PathInvalid(f"unknown edge {e!r}")
    for a, b in zip(edges, edges[1:]):
        if g.range(a) != g.source(b):
            raise PathInvalid(f"edges {a!r} and {b!r} do not compose")
    return PathWord(edges, mode)


def tau_extend(g: BratteliGraph, word: PathWord, depth: int) -> PathWord:
    """Continue the word by repeated tau up to the given depth"""
    edges = list(word.edges)
    if not edges:
        raise PathInvalid("cannot tau-extend an empty word")
    while len(edges) < depth:
        edges.append(g.tau[edges[-1]])
    return PathWord(tuple(edges), TAU_EXTENDED)


def tau_orbit(g: BratteliGraph, edge: str, length: int) -> List[str]:
    """edge, tau(edge), tau^2(edge), ... with the given total length"""
    out = [edge]
    while len(out) < length:
        out.append(g.tau[out[-1]])
    return out


def enumerate_paths(g: BratteliGraph, n: int, start: Optional[str] = None) -> Iterator[Tuple[str, ...]]:
    """All paths of length n, optionally from a fixed start vertex, in declaration order"""
    starts = [start] if start is not None else list(g.vertices)
    for v in starts:
        yield from _paths_from(g, v, n)


def _paths_from(g: BratteliGraph, vertex: str, n: int) -> Iterator[Tuple[str, ...]]:
    if n == 0:
        yield ()
        return
    for e in g.out_edges(vertex):
        for tail in _paths_from(g, g.range(e), n - 1):
            yield (e,) + tail


def enumerate_horizontal(g: BratteliGraph, n: int) -> Iterator[Tuple[Tuple[str, ...], HorizontalPair]]:
    """Level-n horizontal edges as (common prefix of length n-1, H pair)"""
    grouped = g.horizontal_by_source()
    for v in g.vertices:
        for prefix in _paths_from(g, v, n - 1):
            end = g.range(prefix[-1]) if prefix else v
            for pair in grouped[end]:
                yield prefix, pair


# ---------------------------------------------------------------------------
# horizontal connectivity


def horizontal_graph(g: BratteliGraph, vertex: str) -> nx.Graph:
    """Undirected H-graph on the edges leaving a vertex"""
    key = ("hgraph", vertex)
    if key not in g._cache:
        hg = nx.Graph()
        hg.add_nodes_from(g.out_edges(vertex))
        for pair in g.horizontal_by_source()[vertex]:
            hg.add_edge(pair.first, pair.second)
        g._cache[key] = hg
    return g._cache[key]


def horizontal_distance(g: BratteliGraph, a: str, b: str) -> int:
    """Length of a shortest H-path between two edges with a common source"""
    if a == b:
        return 0
    if g.source(a) != g.source(b):
        raise DisconnectedH(f"edges {a!r} and {b!r} have different sources")
    try:
        return nx.shortest_path_length(horizontal_graph(g, g.source(a)), a, b)
    except nx.NetworkXNoPath as exc:
        raise DisconnectedH(f"no H-path between {a!r} and {b!r}") from exc


def check_connectivity(g: BratteliGraph) -> bool:
    """True iff edges with a common source are always joined by an H-path"""
    for v in g.vertices:
        hg = horizontal_graph(g, v)
        if hg.number_of_nodes() > 1 and not nx.is_connected(hg):
            return False
    return True


# ---------------------------------------------------------------------------
# reversal and telescoping


def reverse(g: BratteliGraph, tau: Optional[Mapping[str, str]] = None,
            horizontal: Optional[Sequence] = None, rho: Optional[float] = None) -> BratteliGraph:
    """
    Flip every edge; edge ids are kept. The choice function and H of the
    reversed graph default to default_tau and maximal_horizontal.
    """
    spec = {
        "vertices": list(g.vertices),
        "edges": [[e.id, e.range, e.source] for e in g.edges],
        "star_edge": g.star_edge,
        "rho": g.rho if rho is None else rho,
    }
    if tau is not None:
        spec["tau"] = dict(tau)
    if horizontal is not None:
        spec["horizontal"] = [
            [h.first, h.second, h.orientation] if isinstance(h, HorizontalPair) else list(h)
            for h in horizontal
        ]
    return build_graph(spec)


def telescope(g: BratteliGraph, p: int) -> BratteliGraph:
    """
    Graph whose edges are the paths of length p, with rho^p.

    tau_p(g_1...g_p) = (tau(g_p), ..., tau^p(g_p)). A telescoped H pair
    shares a prefix, differs by an H pair at some position i and
    continues by tau after i; it keeps that pair's orientation.
    """
    if p < 1:
        raise ValueError("telescope requires p >= 1")
    paths = list(enumerate_paths(g, p))
    join = ".".join
    edges = [[join(path), g.source(path[0]), g.range(path[-1])] for path in paths]
    tau = {join(path): join(tau_orbit(g, g.tau[path[-1]], p)) for path in paths}
    horizontal = []
    for v in g.vertices:
        for i in range(1, p + 1):
            for prefix in _paths_from(g, v, i - 1):
                end = g.range(prefix[-1]) if prefix else v
                for pair in g.horizontal_by_source()[end]:
                    left = prefix + tuple(tau_orbit(g, pair.first, p - i + 1))
                    right = prefix + tuple(tau_orbit(g, pair.second, p - i + 1))
                    horizontal.append([join(left), join(right), pair.orientation])
    spec = {
        "vertices": list(g.vertices),
        "edges": edges,
        "star_edge": join([g.star_edge] * p),
        "tau": tau,
        "horizontal": horizontal,
        "rho": g.rho ** p,
    }
    return build_graph(spec)
