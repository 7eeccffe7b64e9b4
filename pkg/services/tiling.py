"""
One-dimensional substitution tilings as stationary Bratteli diagrams.

The substitution graph has one edge "v.k" per letter k of sigma(v), from
sigma(v)[k] to v, so a path e_1 e_2 ... e_n places a tile inside its
n-th order supertile. The reversed graph decomposes a tile into
microtiles. Positions are exact elements of Q(theta).
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from core.config import get_setting
from core.errors import (
    GraphSpecError,
    IrrationalityViolation,
    NoMeeting,
    NotDiagonalizable,
    NotPisot,
    ParameterMismatch,
    TooLarge,
)
from core.utils import parallel_map
from services.eigen import graph_eigendata
from services.forms import EigenFn
from services.graph_core import (
    BratteliGraph,
    HorizontalPair,
    build_graph,
    enumerate_paths,
    path_count,
    path_word,
    reverse,
    with_rho,
)
from services.numberfield import (
    FieldElement,
    NumberField,
    PisotData,
    kernel_vector,
    pf_minimal_polynomial,
    reduced_star_energy,
)
from services.spectral import (
    complex_gamma,
    heat_trace_direct,
    log_slope_fit,
    nonresonant_phase_check,
    spectral_dimension,
)

logger = logging.getLogger(__name__)

BetaValue = Union[FieldElement, int, Fraction, Sequence]


@dataclass(frozen=True)
class Substitution1D:
    alphabet: Tuple[str, ...]
    rules: Mapping[str, Tuple[str, ...]]
    graph: BratteliGraph
    field: NumberField
    lengths: Mapping[str, FieldElement]
    frequencies: Mapping[str, FieldElement]
    offsets: Mapping[str, FieldElement]

    @property
    def theta(self) -> float:
        return self.field.data.theta

    @property
    def theta_exact(self) -> FieldElement:
        return self.field.gen

    @property
    def L(self) -> np.ndarray:
        return np.array([float(self.lengths[v]) for v in self.alphabet])

    @property
    def R(self) -> np.ndarray:
        return np.array([float(self.frequencies[v]) for v in self.alphabet])

    def offset(self, edge_id: str) -> FieldElement:
        """Left endpoint of letter k inside sigma(v), in units of the tiles of sigma(v)"""
        return self.offsets[edge_id]

    def to_dict(self) -> Dict:
        return {
            "alphabet": list(self.alphabet),
            "rules": {v: "".join(w) for v, w in self.rules.items()},
            "theta": self.theta,
            "minpoly": str(self.field.minpoly),
            "lengths": {v: float(x) for v, x in self.lengths.items()},
            "frequencies": {v: float(x) for v, x in self.frequencies.items()},
        }


@dataclass(frozen=True)
class ReturnVector:
    pair: HorizontalPair
    depth: int
    vector: FieldElement


@dataclass(frozen=True)
class MicrotileVector:
    pair: HorizontalPair
    vector: FieldElement


@dataclass(frozen=True)
class HorizontalGeometry:
    transversal: BratteliGraph
    longitudinal: BratteliGraph
    returns: Tuple[ReturnVector, ...]
    microtiles: Tuple[MicrotileVector, ...]
    c_tr: float
    c_lg: float
    K: float

    def to_dict(self) -> Dict:
        return {
            "return_vectors": [
                {"pair": [r.pair.first, r.pair.second], "depth": r.depth, "value": float(r.vector)}
                for r in self.returns
            ],
            "microtile_vectors": [
                {"pair": [a.pair.first, a.pair.second], "value": float(a.vector)}
                for a in self.microtiles
            ],
            "c_tr": self.c_tr,
            "c_lg": self.c_lg,
            "K": self.K,
        }


@dataclass(frozen=True)
class DirichletParameters:
    rho_tr: float
    rho_lg: float
    pisot: PisotData
    nonresonant: bool
    min_gap: Optional[float]
    verdict: str


@dataclass(frozen=True)
class TileFunction:
    """A C^2 function on a tile, coordinate x in [0, length)"""

    value: Callable[[float], float]
    derivative: Callable[[float], float]

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "TileFunction":
        return cls(lambda x: slope * x + intercept, lambda x: slope)

    @classmethod
    def constant(cls, c: float) -> "TileFunction":
        return cls(lambda x: c, lambda x: 0.0)

    @classmethod
    def sine(cls, period: float) -> "TileFunction":
        w = 2 * math.pi / period
        return cls(lambda x: math.sin(w * x), lambda x: w * math.cos(w * x))


@dataclass(frozen=True)
class TransversalCheck:
    values: Tuple[float, ...]
    window: Tuple[int, int]
    average: float
    expected: float
    relative_error: float


@dataclass(frozen=True)
class LongitudinalCheck:
    numeric: float
    closed_form: float
    n: int
    relative_error: float


@dataclass(frozen=True)
class OmegaResidue:
    mean: complex
    residue: complex
    resonant: bool
    ratio: Optional[Tuple[int, int]]
    positive: bool


@dataclass(frozen=True)
class OmegaTriple:
    transversal: BratteliGraph
    longitudinal: BratteliGraph
    rho_tr: float
    rho_lg: float
    s_tr: float
    s_lg: float
    s0: float
    residue: OmegaResidue

    def heat_trace(self, t: float) -> float:
        return heat_trace_direct(self.transversal, t) * heat_trace_direct(self.longitudinal, t)

    def to_dict(self) -> Dict:
        return {
            "rho_tr": self.rho_tr,
            "rho_lg": self.rho_lg,
            "s_tr": self.s_tr,
            "s_lg": self.s_lg,
            "s0": self.s0,
            "residue": self.residue.residue,
            "residue_positive": self.residue.positive,
            "resonant_periods": self.residue.resonant,
            "period_ratio": list(self.residue.ratio) if self.residue.ratio else None,
        }


# ---------------------------------------------------------------------------
# construction


def _parse_rules(rules: Mapping, alphabet: Optional[Sequence[str]]) -> Tuple[Tuple[str, ...], Dict[str, Tuple[str, ...]]]:
    parsed = {str(v): tuple(str(c) for c in w) for v, w in rules.items()}
    letters = tuple(str(v) for v in alphabet) if alphabet is not None else tuple(parsed)
    problems = []
    if set(letters) != set(parsed):
        problems.append("alphabet and rule keys differ")
    for v, word in parsed.items():
        if not word:
            problems.append(f"sigma({v}) is empty")
        for c in word:
            if c not in parsed:
                problems.append(f"sigma({v}) uses unknown letter {c!r}")
    if problems:
        raise GraphSpecError(problems[0], violations=problems)
    return letters, parsed


def substitution_matrix(alphabet: Sequence[str], rules: Mapping[str, Sequence[str]]) -> np.ndarray:
    """A[u, v] = occurrences of u in sigma(v)"""
    index = {v: i for i, v in enumerate(alphabet)}
    A = np.zeros((len(alphabet), len(alphabet)), dtype=np.int64)
    for v, word in rules.items():
        for u in word:
            A[index[u], index[v]] += 1
    return A


def build_substitution(rules: Mapping, alphabet: Optional[Sequence[str]] = None,
                       rho: Optional[float] = None, horizontal: Optional[Sequence] = None,
                       star_edge: Optional[str] = None) -> Substitution1D:
    """
    Substitution graph with exact Perron-Frobenius data:
    lengths L (theta L_v = sum of the lengths in sigma(v)) and frequencies R,
    normalized to sum(R) = 1 and sum(R L) = 1. rho defaults to 1/theta.
    """
    letters, parsed = _parse_rules(rules, alphabet)
    A = substitution_matrix(letters, parsed)
    nf = NumberField(pf_minimal_polynomial(A))
    theta = nf.gen

    edges = [[f"{v}.{k}", u, v] for v in letters for k, u in enumerate(parsed[v])]
    if star_edge is None:
        loops = [e[0] for e in edges if e[1] == e[2]]
        if not loops:
            raise GraphSpecError("the substitution has no letter v with v in sigma(v) at a fixed position; "
                                 "supply a power of the substitution")
        star_edge = loops[0]
    spec = {
        "vertices": list(letters),
        "edges": edges,
        "star_edge": star_edge,
        "rho": rho if rho is not None else 1.0 / nf.data.theta,
    }
    if horizontal is not None:
        spec["horizontal"] = list(horizontal)
    graph = build_graph(spec)

    dim = len(letters)
    # (A^T - theta) L = 0 and (A - theta) R = 0 over Q(theta)
    lengths = kernel_vector([[nf.element([int(A[j, i])]) - (theta if i == j else 0) for j in range(dim)]
                             for i in range(dim)])
    freqs = kernel_vector([[nf.element([int(A[i, j])]) - (theta if i == j else 0) for j in range(dim)]
                           for i in range(dim)])
    total = sum(freqs[1:], freqs[0])
    freqs = [x / total for x in freqs]
    pairing = sum((r * l for r, l in zip(freqs[1:], lengths[1:])), freqs[0] * lengths[0])
    lengths = [x / pairing for x in lengths]
    length_of = dict(zip(letters, lengths))

    for v in letters:
        inflated = sum((length_of[u] for u in parsed[v]), nf.zero)
        if inflated != theta * length_of[v]:
            raise GraphSpecError(f"length of sigma({v}) is inconsistent with theta")

    offsets: Dict[str, FieldElement] = {}
    for v in letters:
        running = nf.zero
        for k, u in enumerate(parsed[v]):
            offsets[f"{v}.{k}"] = running
            running = running + length_of[u]

    logger.info("Built substitution on %s with theta=%.12g (%s)", "".join(letters), nf.data.theta, nf.minpoly)
    return Substitution1D(
        alphabet=letters,
        rules=parsed,
        graph=graph,
        field=nf,
        lengths=length_of,
        frequencies=dict(zip(letters, freqs)),
        offsets=offsets,
    )


def exact_lengths(sub: Substitution1D) -> Dict[str, FieldElement]:
    return dict(sub.lengths)


def exact_frequencies(sub: Substitution1D) -> Dict[str, FieldElement]:
    return dict(sub.frequencies)


def letter_frequencies(sub: Substitution1D, letter: str, n: int) -> Dict[str, float]:
    """Letter frequencies measured in sigma^n(letter)"""
    counts = path_count(substitution_matrix(sub.alphabet, sub.rules), n)[:, sub.alphabet.index(letter)]
    total = sum(int(c) for c in counts)
    return {v: int(c) / total for v, c in zip(sub.alphabet, counts)}


def longitudinal_graph(sub: Substitution1D, rho: Optional[float] = None,
                       horizontal: Optional[Sequence] = None) -> BratteliGraph:
    """Reversed substitution graph: paths decompose a tile into microtiles"""
    return reverse(sub.graph, horizontal=horizontal, rho=rho if rho is not None else 1.0 / sub.theta)


# ---------------------------------------------------------------------------
# positions


def supertile_offsets(sub: Substitution1D, letter: str, n: int) -> List[Tuple[str, FieldElement]]:
    """Left endpoints of the level-0 tiles of sigma^n(letter), in order"""
    if n > get_setting("max_supertile_level"):
        raise TooLarge(f"supertile level {n} exceeds {get_setting('max_supertile_level')}")
    column = path_count(substitution_matrix(sub.alphabet, sub.rules), n)[:, sub.alphabet.index(letter)]
    if sum(int(c) for c in column) > get_setting("max_offsets"):
        raise TooLarge(f"sigma^{n}({letter}) has more than {get_setting('max_offsets')} tiles")

    theta = sub.theta_exact
    memo: Dict[Tuple[str, int], List[Tuple[str, FieldElement]]] = {}

    def layout(v: str, level: int) -> List[Tuple[str, FieldElement]]:
        if level == 0:
            return [(v, sub.field.zero)]
        if (v, level) not in memo:
            scale = theta ** (level - 1)
            out = []
            for k, u in enumerate(sub.rules[v]):
                shift = scale * sub.offset(f"{v}.{k}")
                out.extend((w, shift + x) for w, x in layout(u, level - 1))
            memo[(v, level)] = out
        return memo[(v, level)]

    return layout(letter, n)


def tile_position(sub: Substitution1D, edges: Sequence[str]) -> FieldElement:
    """Left endpoint of the level-0 tile a path selects in its supertile: sum_i theta^{i-1} off(e_i)"""
    theta = sub.theta_exact
    total, scale = sub.field.zero, sub.field.one
    for e in edges:
        total = total + scale * sub.offset(e)
        scale = scale * theta
    return total


def path_offset(sub: Substitution1D, path: Sequence[str]) -> FieldElement:
    """tile_position of a validated path of the transversal graph"""
    return tile_position(sub, path_word(sub.graph, path).edges)


def _orbit_limit(sub: Substitution1D) -> int:
    return 2 * len(sub.alphabet) + 2


def puncture(sub: Substitution1D, lg: BratteliGraph, edge: str) -> FieldElement:
    """
    Puncture of a microtile, continued by the reversed choice function:
    off(e_0) + sum_{i>=1} theta^{-i} off(e_i) with an exact geometric tail
    once the orbit reaches the star loop.
    """
    theta_inv = sub.theta_exact.inverse()
    total, scale = sub.field.zero, sub.field.one
    e = edge
    for _ in range(_orbit_limit(sub)):
        if e == lg.star_edge:
            # sum_{i>=0} theta^{-i} = theta / (theta - 1)
            return total + scale * sub.offset(e) * sub.theta_exact / (sub.theta_exact - 1)
        total = total + scale * sub.offset(e)
        scale = scale * theta_inv
        e = lg.tau[e]
    raise NoMeeting(f"the orbit of {edge!r} does not reach the star loop")


def micro_position(sub: Substitution1D, path: Sequence[str], lg: Optional[BratteliGraph] = None) -> FieldElement:
    """Puncture of the microtile selected by a path of the reversed graph, in tile coordinates"""
    lg = lg or longitudinal_graph(sub)
    edges = path_word(lg, path).edges
    theta_inv = sub.theta_exact.inverse()
    total, scale = sub.field.zero, theta_inv
    for e in edges[:-1]:
        total = total + scale * sub.offset(e)
        scale = scale * theta_inv
    return total + scale * puncture(sub, lg, edges[-1])


# ---------------------------------------------------------------------------
# return and microtile vectors


def return_vectors(sub: Substitution1D, horizontal: Optional[Sequence[HorizontalPair]] = None,
                   graph: Optional[BratteliGraph] = None) -> Tuple[ReturnVector, ...]:
    """
    For each H pair, follow the tau orbits of both edges until they meet;
    r_h is the offset difference of the two tiles inside the common supertile.
    """
    g = graph or sub.graph
    pairs = g.horizontal if horizontal is None else horizontal
    out = []
    for pair in pairs:
        first, second = [pair.first], [pair.second]
        while first[-1] != second[-1]:
            if len(first) > _orbit_limit(sub):
                raise NoMeeting(f"tau orbits of {pair.first!r} and {pair.second!r} never meet")
            first.append(g.tau[first[-1]])
            second.append(g.tau[second[-1]])
        depth = len(first) - 1
        vector = tile_position(sub, second[:depth]) - tile_position(sub, first[:depth])
        out.append(ReturnVector(pair, depth, vector))
    return tuple(out)


def microtile_vectors(sub: Substitution1D, lg: Optional[BratteliGraph] = None) -> Tuple[MicrotileVector, ...]:
    """a_h = puncture difference of the two microtiles of a pair in their common tile"""
    lg = lg or longitudinal_graph(sub)
    return tuple(
        MicrotileVector(pair, puncture(sub, lg, pair.second) - puncture(sub, lg, pair.first))
        for pair in lg.horizontal
    )


def horizontal_geometry(sub: Substitution1D, tr_graph: Optional[BratteliGraph] = None,
                        lg_graph: Optional[BratteliGraph] = None) -> HorizontalGeometry:
    tr = tr_graph or sub.graph
    lg = lg_graph or longitudinal_graph(sub)
    returns = return_vectors(sub, graph=tr)
    micro = microtile_vectors(sub, lg)
    R = {v: float(x) for v, x in sub.frequencies.items()}
    L = {v: float(x) for v, x in sub.lengths.items()}
    c_tr = 1.0 / sum(L[tr.source(h.first)] for h in tr.horizontal)
    c_lg = 1.0 / sum(R[lg.source(h.first)] for h in lg.horizontal)
    K = sum(R[lg.source(m.pair.first)] * float(m.vector) ** 2 for m in micro)
    return HorizontalGeometry(tr, lg, returns, micro, c_tr, c_lg, K)


def beta_from_return_value(sub: Substitution1D, geo: HorizontalGeometry, value: BetaValue) -> FieldElement:
    """The frequency b with beta(r) = b r and beta(r_{h0}) = value for the first H pair"""
    if not geo.returns:
        raise GraphSpecError("no transversal horizontal edges")
    if isinstance(value, FieldElement):
        target = value
    elif isinstance(value, (int, Fraction)):
        target = sub.field.element([value])
    else:
        target = sub.field.element([Fraction(c) for c in value])
    return target / geo.returns[0].vector


# ---------------------------------------------------------------------------
# Dirichlet forms


def dirichlet_parameters(sub: Substitution1D, kmax: Optional[int] = None) -> DirichletParameters:
    """rho_tr = |theta_2|, rho_lg = 1/theta and the non-resonance of the subleading phases"""
    if sub.field.degree == 1:
        raise IrrationalityViolation(
            f"theta = {sub.theta:g} is rational; the Pisot pipeline needs an irrational dilation")
    pd = sub.field.data
    if not pd.pisot:
        raise NotPisot(f"theta = {sub.theta:.12g} is not a Pisot number ({pd.minpoly})")
    rho_tr, rho_lg = abs(pd.conjugates[1]), 1.0 / pd.theta
    if pd.L <= 2:
        return DirichletParameters(rho_tr, rho_lg, pd, True, None, "vacuous: single subleading conjugate")
    gaps, resonant = [], None
    for i, a in enumerate(pd.phases):
        for j, b in enumerate(pd.phases):
            if i == j:
                continue
            check = nonresonant_phase_check(a - b, rho_tr, rho_lg, kmax)
            gaps.append(check.min_gap)
            if check.resonant and resonant is None:
                resonant = check
    if resonant is not None:
        logger.warning("Subleading phases are resonant: %s", resonant.verdict)
        return DirichletParameters(rho_tr, rho_lg, pd, False, min(gaps), resonant.verdict)
    kmax = int(get_setting("resonance_kmax", kmax))
    return DirichletParameters(rho_tr, rho_lg, pd, True, min(gaps), f"non-resonant up to Kmax={kmax}")


def _beta_values(geo: HorizontalGeometry, beta: FieldElement) -> List[FieldElement]:
    return [beta * r.vector for r in geo.returns]


def laplacian_eigenvalue(sub: Substitution1D, geo: HorizontalGeometry, beta: FieldElement,
                         which: str) -> float:
    """
    Eigenvalue of the transversal or longitudinal Laplacian on the
    eigenfunction of frequency beta.
    """
    R = {v: float(x) for v, x in sub.frequencies.items()}
    if which == "lg":
        lg = geo.longitudinal
        total = sum(R[lg.source(m.pair.first)] * float(beta * m.vector) ** 2 for m in geo.microtiles)
        return -geo.c_lg * (2 * math.pi) ** 2 * total
    if which == "tr":
        pd = sub.field.data
        if not pd.pisot:
            raise NotPisot(f"{pd.minpoly} is not a Pisot polynomial")
        tr = geo.transversal
        total = sum(R[tr.source(r.pair.first)] * reduced_star_energy(value, pd)
                    for r, value in zip(geo.returns, _beta_values(geo, beta)))
        return -geo.c_tr * (2 * math.pi) ** 2 * total
    raise ValueError(f"which must be 'tr' or 'lg', not {which!r}")


def _phase_gap_energy(value: FieldElement, theta_n: FieldElement, n: int) -> float:
    # |e^{2 pi i phase} - 1|^2 with phase = value theta^n mod 1, via the conjugates
    field_ = value.field
    base = value.embeddings()
    conj = [base[j] * field_.roots[j] ** n for j in range(1, field_.degree)]
    phase = (value * theta_n).phase_mod_one(conj)
    phase -= round(phase)
    return 4.0 * math.sin(math.pi * phase) ** 2


def q_tr_sequence(sub: Substitution1D, geo: HorizontalGeometry, beta: FieldElement,
                  ns: Sequence[int], rho_tr: Optional[float] = None) -> List[float]:
    """c_tr sum_h freq(t_{s^2 h}) |e^{2 pi i beta(r_h) theta^n} - 1|^2 / rho_tr^{2n}"""
    rho_tr = rho_tr if rho_tr is not None else geo.transversal.rho
    R = {v: float(x) for v, x in sub.frequencies.items()}
    tr = geo.transversal
    values = _beta_values(geo, beta)
    weights = [R[tr.source(r.pair.first)] for r in geo.returns]
    theta = sub.theta_exact

    def level(n: int) -> float:
        theta_n = theta ** n
        total = sum(w * _phase_gap_energy(v, theta_n, n) for w, v in zip(weights, values) if not v.is_zero())
        return geo.c_tr * total / rho_tr ** (2 * n)

    return parallel_map(level, list(ns))


def q_tr_numeric(sub: Substitution1D, geo: HorizontalGeometry, beta: FieldElement,
                 n_window: Tuple[int, int] = (20, 40), rho_tr: Optional[float] = None) -> TransversalCheck:
    """Window average of the transversal sequence against -Delta_tr"""
    pd = sub.field.data
    if not pd.pisot:
        raise NotPisot(f"{pd.minpoly} is not a Pisot polynomial")
    expected_rho = abs(pd.conjugates[1])
    rho_tr = expected_rho if rho_tr is None else rho_tr
    if abs(rho_tr - expected_rho) > 1e-9:
        raise ParameterMismatch(f"rho_tr={rho_tr} differs from |theta_2|={expected_rho}")
    lo, hi = n_window
    values = q_tr_sequence(sub, geo, beta, range(lo, hi + 1), rho_tr)
    average = float(np.mean(values))
    expected = -laplacian_eigenvalue(sub, geo, beta, "tr")
    error = abs(average - expected) / abs(expected) if expected else abs(average)
    return TransversalCheck(tuple(values), (lo, hi), average, expected, error)


def _level_points(sub: Substitution1D, lg: BratteliGraph, vertex: str, n: int):
    theta_inv = 1.0 / sub.theta
    punct = {e.id: float(puncture(sub, lg, e.id)) for e in lg.edges}
    offsets = {e.id: float(sub.offset(e.id)) for e in lg.edges}
    grouped = lg.horizontal_by_source()
    for prefix in enumerate_paths(lg, n - 1, start=vertex):
        base, scale = 0.0, theta_inv
        for e in prefix:
            base += scale * offsets[e]
            scale *= theta_inv
        end = lg.range(prefix[-1]) if prefix else vertex
        for pair in grouped[end]:
            yield base + scale * punct[pair.first], base + scale * punct[pair.second]


def q_lg_sequence(sub: Substitution1D, geo: HorizontalGeometry, f: TileFunction, g: TileFunction,
                  ns: Sequence[int], rho_lg: Optional[float] = None,
                  vertex: Optional[str] = None) -> List[float]:
    """Level-n longitudinal forms on the tile of the given vertex by exact enumeration"""
    lg = geo.longitudinal
    rho_lg = rho_lg if rho_lg is not None else lg.rho
    vertex = vertex or sub.alphabet[0]
    out = []
    for n in ns:
        if n > get_setting("form_max_depth"):
            raise TooLarge(f"level {n} exceeds {get_setting('form_max_depth')}")
        terms = []
        for xs, xr in _level_points(sub, lg, vertex, n):
            df = (f.value(xr) - f.value(xs)) / rho_lg ** n
            dg = (g.value(xr) - g.value(xs)) / rho_lg ** n
            terms.append(df * dg)
        out.append(math.fsum(terms) / len(terms) if terms else 0.0)
    return out


def lg_form_closed(sub: Substitution1D, geo: HorizontalGeometry, f: TileFunction, g: TileFunction,
                   vertex: Optional[str] = None) -> float:
    """c_lg sum_h freq(t_{s^2 h}) a_h^2 times the tile average of f' g'"""
    vertex = vertex or sub.alphabet[0]
    length = float(sub.lengths[vertex])
    integral, _ = integrate.quad(lambda x: f.derivative(x) * g.derivative(x), 0.0, length, limit=200)
    return geo.c_lg * geo.K * integral / length


def q_lg_numeric(sub: Substitution1D, geo: HorizontalGeometry, f: TileFunction, g: TileFunction,
                 n: int = 12, rho_lg: Optional[float] = None, vertex: Optional[str] = None) -> LongitudinalCheck:
    expected_rho = 1.0 / sub.theta
    rho_lg = expected_rho if rho_lg is None else rho_lg
    if abs(rho_lg - expected_rho) > 1e-9:
        raise ParameterMismatch(f"rho_lg={rho_lg} differs from 1/theta={expected_rho}")
    numeric = q_lg_sequence(sub, geo, f, g, [n], rho_lg, vertex)[0]
    closed = lg_form_closed(sub, geo, f, g, vertex)
    error = abs(numeric - closed) / abs(closed) if closed else abs(numeric)
    return LongitudinalCheck(numeric, closed, n, error)


def eigen_observable(sub: Substitution1D, beta: FieldElement, depth: int) -> EigenFn:
    """The eigenfunction of frequency beta pulled back to the substitution graph"""
    return EigenFn(beta, lambda word: path_offset(sub, word.edges[:depth]), depth)


# ---------------------------------------------------------------------------
# the triple on the hull


def _heat_fourier(g: BratteliGraph, k: int) -> complex:
    # k-th Fourier coefficient of the leading log-periodic heat coefficient
    ed = graph_eigendata(g)
    if not ed.diagonalizable:
        raise NotDiagonalizable("the residue needs diagonalizable graph matrices")
    r = -2 * math.log(g.rho)
    return ed.cH[0] / r * complex_gamma(math.log(ed.pf) / r + 2j * math.pi * k / r)


def omega_residue(tr: BratteliGraph, lg: BratteliGraph, K: Optional[int] = None) -> OmegaResidue:
    """
    Residue of the tensor zeta function at s0: the mean of the product of
    the two log-periodic heat coefficients, summed over the lattice of
    matching frequencies k1/r1 + k2/r2 = 0.
    """
    K = get_setting("frak_f_terms", K)
    r1, r2 = -2 * math.log(tr.rho), -2 * math.log(lg.rho)
    ratio = Fraction(r1 / r2).limit_denominator(64)
    resonant = abs(float(ratio) - r1 / r2) <= 1e-9 * (r1 / r2)
    mean = _heat_fourier(tr, 0) * _heat_fourier(lg, 0)
    if resonant:
        p, q = ratio.numerator, ratio.denominator
        for m in range(1, K + 1):
            mean += _heat_fourier(tr, -p * m) * _heat_fourier(lg, q * m)
            mean += _heat_fourier(tr, p * m) * _heat_fourier(lg, -q * m)
    s0 = spectral_dimension(tr) + spectral_dimension(lg)
    residue = 2 * mean / complex_gamma(s0 / 2)
    positive = residue.real > 0 and abs(residue.imag) <= 1e-9 * abs(residue)
    return OmegaResidue(
        mean=mean,
        residue=residue,
        resonant=resonant,
        ratio=(ratio.numerator, ratio.denominator) if resonant else None,
        positive=positive,
    )


def omega_triple(sub: Substitution1D, rho_tr: Optional[float] = None, rho_lg: Optional[float] = None,
                 horizontal_tr: Optional[Sequence] = None, horizontal_lg: Optional[Sequence] = None) -> OmegaTriple:
    """
    Tensor product of the transversal triple (substitution graph, rho_tr)
    and the longitudinal one (reversed graph, rho_lg). rho_tr defaults to
    |theta_2| for Pisot theta and to 1/theta otherwise.
    """
    pd = sub.field.data
    if rho_tr is None:
        rho_tr = abs(pd.conjugates[1]) if pd.pisot else 1.0 / sub.theta
    rho_lg = 1.0 / sub.theta if rho_lg is None else rho_lg
    if horizontal_tr is None:
        tr = with_rho(sub.graph, rho_tr)
    else:
        spec = sub.graph.to_spec()
        spec.update(rho=rho_tr, horizontal=list(horizontal_tr))
        tr = build_graph(spec)
    lg = longitudinal_graph(sub, rho_lg, horizontal_lg)
    s_tr = math.log(sub.theta) / -math.log(rho_tr)
    s_lg = math.log(sub.theta) / -math.log(rho_lg)
    return OmegaTriple(tr, lg, rho_tr, rho_lg, s_tr, s_lg, s_tr + s_lg, omega_residue(tr, lg))


def omega_slope(omega: OmegaTriple, t_min: float = 1e-12, t_max: float = 1e-6, points: int = 13) -> float:
    """Dimension estimate -2 d log Tr e^{-t D^2} / d log t over a log grid"""
    ts = list(np.geomspace(t_min, t_max, points))
    traces = parallel_map(omega.heat_trace, ts)
    return -2.0 * log_slope_fit(ts, traces)
