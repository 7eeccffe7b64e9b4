"""
Analytic core: zeta function, poles and residues, heat-kernel trace,
complex Gamma, spectral state and measure, tensor and direct sums,
resonance diagnostics.

The Dirac operator acts on level-n horizontal edges with eigenvalue
rho^{-n}; its multiplicity is #E_n = sum_j C^j_H lambda_j^n.
"""

import cmath
import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from core.config import RESIDUE_CONVENTION_WARNING, get_setting
from core.errors import (
    AtPole,
    BothResiduesZero,
    DivergesAt,
    InsufficientDecay,
    NotDiagonalizable,
    PathInvalid,
)
from core.utils import KahanSum, cauchy_differences, parallel_map
from services.eigen import EigenData, graph_eigendata
from services.forms import Cylinder, observable_on_level
from services.graph_core import BratteliGraph, PathWord, graph_matrix

logger = logging.getLogger(__name__)

_counts_lock = threading.Lock()


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class Pole:
    location: complex
    residue: complex
    alternative_residue: complex
    eigenvalue: complex
    k: int
    removable: bool
    numeric_residue: Optional[complex] = None
    verified: Optional[bool] = None


@dataclass(frozen=True)
class ZetaReport:
    s0: float
    poles: Tuple[Pole, ...]
    period: float
    closed_form_coeffs: Tuple[Tuple[complex, complex], ...]
    warnings: Tuple[str, ...] = ()
    entire_term: complex = 0j  # D_0, coefficient of rho^z


@dataclass(frozen=True)
class HeatTraceReport:
    t: Tuple[float, ...]
    direct: Tuple[float, ...]
    expansion: Tuple[Optional[float], ...]
    residual: Tuple[Optional[float], ...]
    scaled_direct: Tuple[float, ...]  # direct * t^{s0/2}
    period: float
    leading_exponent: float
    residual_limit: Optional[float]
    log_coefficient: Optional[float]

    def rows(self) -> List[Tuple]:
        return list(zip(self.t, self.direct, self.expansion, self.residual))


@dataclass(frozen=True)
class StateResult:
    value: complex
    sequence: Tuple[complex, ...]
    cauchy: Tuple[float, ...]
    converged: bool


@dataclass(frozen=True)
class StateWeights:
    """Per-level data of a diagonal operator: energies rho^{-2n}, dims #E_n, means"""

    log_energies: np.ndarray
    log_dims: np.ndarray
    means: np.ndarray
    a: float
    log_cutoff: float

    def __post_init__(self):
        if not (len(self.log_energies) == len(self.log_dims) == len(self.means)):
            raise ValueError("StateWeights arrays must have equal length")


@dataclass(frozen=True)
class LaplaceRatioResult:
    value: complex
    spread: float
    s_grid: Tuple[float, ...]
    ratios: Tuple[complex, ...]


@dataclass(frozen=True)
class ResonanceCheck:
    resonant: bool
    witness: Optional[Tuple[int, int]]
    min_gap: float
    kmax: int
    verdict: str


@dataclass(frozen=True)
class LevelDiagonal:
    """Diagonal operator that is constant on each level: value(n) on E_n"""

    value: Callable[[int], complex]


# ---------------------------------------------------------------------------
# Dirac spectrum and counts


def horizontal_counts(g: BratteliGraph, n_max: int) -> List[int]:
    """[#E_1, ..., #E_{n_max}] as exact integers, cached on the graph"""
    with _counts_lock:
        cache = g._cache.setdefault("E_counts", {"row": None, "counts": []})
        counts = cache["counts"]
        if len(counts) >= n_max:
            return counts[:n_max]
        A = np.array(graph_matrix(g).tolist(), dtype=object)
        index = g.vertex_index
        sources = [index[g.source(h.first)] for h in g.horizontal]
        row = cache["row"]
        if row is None:
            row = np.ones(len(g.vertices), dtype=np.int64).astype(object)
        while len(counts) < n_max:
            counts.append(int(sum(row[s] for s in sources)))
            row = row.dot(A)
        cache["row"] = row
        return counts[:n_max]


def dirac_spectrum(g: BratteliGraph, N: int) -> List[Tuple[float, int]]:
    """(rho^{-n}, #E_n) for n = 1..N"""
    if N <= 0:
        return []
    counts = horizontal_counts(g, N)
    return [(g.rho ** (-n), counts[n - 1]) for n in range(1, N + 1)]


def spectral_dimension(g: BratteliGraph) -> float:
    """s0 = log pf / (-log rho)"""
    ed = graph_eigendata(g)
    return math.log(ed.pf) / (-math.log(g.rho))


def _diagonal_data(g: BratteliGraph) -> EigenData:
    ed = graph_eigendata(g)
    if not ed.diagonalizable:
        raise NotDiagonalizable("closed forms need a diagonalizable graph matrix")
    return ed


def _tail_constant(g: BratteliGraph, ed: EigenData) -> float:
    """K with #E_n <= K pf^n for all n"""
    index = g.vertex_index
    total = sum(ed.L[index[g.source(h.first)]] for h in g.horizontal)
    return float(total / (ed.pf * ed.L.min()))


# ---------------------------------------------------------------------------
# zeta function


def zeta_closed(g: BratteliGraph, z: complex) -> complex:
    """sum_k C^k lambda_k rho^z / (1 - lambda_k rho^z) + D_0 rho^z, D_0 the entire kernel part"""
    ed = _diagonal_data(g)
    w = cmath.exp(complex(z) * math.log(g.rho))
    total = ed.c_zero * w
    for c, lam in zip(ed.cH, ed.eigenvalues):
        if lam == 0 or abs(c) < 1e-14:
            continue
        denom = 1 - lam * w
        if abs(denom) < 1e-14:
            raise AtPole(f"z={z} is a pole of zeta (eigenvalue {lam})")
        total += c * lam * w / denom
    return total


def zeta_series(g: BratteliGraph, z: complex, N: int) -> Tuple[complex, float]:
    """Truncated Dirichlet series sum_{n<=N} #E_n rho^{nz} and a geometric tail bound"""
    z = complex(z)
    s0 = spectral_dimension(g)
    if z.real <= s0:
        raise DivergesAt(f"Re z={z.real} does not exceed s0={s0}")
    ed = graph_eigendata(g)
    log_rho = math.log(g.rho)
    acc = KahanSum()
    for n, count in enumerate(horizontal_counts(g, N), start=1):
        if count:
            acc.add(cmath.exp(math.log(count) + n * z * log_rho))
    q = ed.pf * g.rho ** z.real
    tail = _tail_constant(g, ed) * q ** (N + 1) / (1 - q)
    return complex(acc.value), float(tail)


def poles_and_residues(g: BratteliGraph, kmax: int = 0, verify: bool = True) -> ZetaReport:
    """
    Poles (log lambda_j + 2 pi i k)/(-log rho) for |k| <= kmax with residues
    C^j_H/(-log rho); each one checked against (z - z0) zeta(z) at z0 + step.
    """
    ed = _diagonal_data(g)
    neg_log_rho = -math.log(g.rho)
    step = get_setting("residue_step")
    tol = get_setting("residue_tol")
    poles = []
    for c, lam in zip(ed.cH, ed.eigenvalues):
        if lam == 0:
            continue
        for k in range(-kmax, kmax + 1):
            location = (cmath.log(lam) + 2j * math.pi * k) / neg_log_rho
            residue = c / neg_log_rho
            removable = abs(c) < 1e-12
            numeric, verified = None, None
            if verify and not removable:
                numeric = step * zeta_closed(g, location + step)
                verified = abs(numeric - residue) <= tol * abs(residue)
                if not verified:
                    logger.warning("Residue at %s failed the numeric check: %s vs %s",
                                   location, numeric, residue)
            poles.append(Pole(location, residue, c * lam / neg_log_rho, lam, k,
                              removable, numeric, verified))
    return ZetaReport(
        s0=spectral_dimension(g),
        poles=tuple(poles),
        period=2 * math.pi / neg_log_rho,
        closed_form_coeffs=tuple(zip(ed.cH, ed.eigenvalues)),
        warnings=(RESIDUE_CONVENTION_WARNING,),
        entire_term=ed.c_zero,
    )


def leading_residue(g: BratteliGraph) -> float:
    """Residue of zeta at s0"""
    ed = _diagonal_data(g)
    return float((ed.cH[0] / -math.log(g.rho)).real)


# ---------------------------------------------------------------------------
# Gamma and the log-periodic coefficients

_LANCZOS_G = 7
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def complex_gamma(z: complex) -> complex:
    """Gamma(z) by the Lanczos approximation (g=7, n=9) with reflection"""
    return cmath.exp(complex_log_gamma(z))


def complex_log_gamma(z: complex) -> complex:
    """
    A logarithm of Gamma(z), up to a multiple of 2 pi i.

    Sin and Gamma(1 - z) in the reflection formula both overflow for
    |Im z| above ~228 although their product does not, so the reflection
    is carried out on logarithms.
    """
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise AtPole(f"Gamma has a pole at {z.real:g}")
    if z.real < 0.5:
        return math.log(math.pi) - _log_sin_pi(z) - complex_log_gamma(1 - z)
    z -= 1
    x = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2 * math.pi) + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def _log_sin_pi(z: complex) -> complex:
    # log sin(pi z) mod 2 pi i, factoring out the growing exponential
    w = math.pi * z
    if w.imag > 0:
        return -1j * w + cmath.log(1 - cmath.exp(2j * w)) + cmath.log(0.5j)
    if w.imag < 0:
        return 1j * w + cmath.log(1 - cmath.exp(-2j * w)) - cmath.log(2j)
    return cmath.log(cmath.sin(w))


def frak_f(r: float, a: complex, sigma: float, K: int = 40) -> complex:
    """(1/r) sum_{|k|<=K} Gamma(a/r + 2 pi i k/r) e^{2 pi i k sigma/r}, r-periodic in sigma"""
    if K < 1:
        raise ValueError("frak_f needs K >= 1")
    sigma = math.fmod(sigma, r)
    if sigma < 0:
        sigma += r
    acc = KahanSum()
    for k in range(-K, K + 1):
        acc.add(complex_gamma(a / r + 2j * math.pi * k / r) * cmath.exp(2j * math.pi * k * sigma / r))
    return complex(acc.value) / r


# ---------------------------------------------------------------------------
# heat trace


def heat_trace_direct(g: BratteliGraph, t: float, eps: Optional[float] = None) -> float:
    """
    sum_n #E_n exp(-t rho^{-2n}), compensated.

    Stops once rho^{-2n} t > 2n log pf (terms decay geometrically from
    there) and the term is below eps * sum / safety.
    """
    if t <= 0:
        raise ValueError("heat trace needs t > 0")
    eps = get_setting("heat_eps", eps)
    safety = get_setting("heat_safety")
    log_pf = math.log(graph_eigendata(g).pf)
    neg2_log_rho = -2 * math.log(g.rho)
    acc = KahanSum()
    n, chunk = 0, 64
    while True:
        counts = horizontal_counts(g, n + chunk)
        for count in counts[n:]:
            n += 1
            energy = math.exp(min(n * neg2_log_rho, 700.0))
            term = math.exp(math.log(count) - t * energy) if count else 0.0
            acc.add(term)
            if energy * t > 2 * n * log_pf and term <= eps * acc.value / safety:
                return acc.value
        chunk *= 2
        if n > 100000:
            logger.warning("heat_trace_direct stopped after %d levels at t=%g", n, t)
            return acc.value


def heat_trace_expansion(g: BratteliGraph, t: float, K: Optional[int] = None) -> float:
    """Singular part of the small-t expansion, including the log term of lambda = 1"""
    if not 0 < t < 1:
        raise ValueError("heat expansion needs 0 < t < 1")
    ed = _diagonal_data(g)
    K = get_setting("frak_f_terms", K)
    log_rho = math.log(g.rho)
    r = -2 * log_rho
    total = 0j
    for c, lam in zip(ed.cH, ed.eigenvalues):
        if abs(lam) > 1 + 1e-12:
            a = cmath.log(lam)
            total += c * frak_f(r, a, -math.log(t), K) * cmath.exp(a / (2 * log_rho) * math.log(t))
        elif abs(lam - 1) < 1e-12:
            total += c * (-math.log(t)) / r
    return total.real


def log_coefficient(g: BratteliGraph) -> Optional[float]:
    """Coefficient b of (-log t) in the expansion, None without eigenvalue 1"""
    ed = _diagonal_data(g)
    for c, lam in zip(ed.cH, ed.eigenvalues):
        if abs(lam - 1) < 1e-12:
            return float(c.real / (-2 * math.log(g.rho)))
    return None


def heat_residual_limit(g: BratteliGraph) -> Optional[float]:
    """
    Limit of direct - expansion as t -> 0: the value at 0 of the closed
    zeta form. None when a log term or a unimodular eigenvalue other than 1
    makes the remainder non-convergent.
    """
    ed = _diagonal_data(g)
    total = complex(ed.c_zero)
    for c, lam in zip(ed.cH, ed.eigenvalues):
        if lam == 0 or abs(c) < 1e-14:
            continue
        if abs(abs(lam) - 1) < 1e-12:
            return None
        total += c * lam / (1 - lam)
    return total.real


def heat_trace_sweep(g: BratteliGraph, ts: Sequence[float], eps: Optional[float] = None,
                     K: Optional[int] = None) -> HeatTraceReport:
    """Direct trace and expansion over a t grid, evaluated in parallel"""
    ts = [float(t) for t in ts]
    if any(t <= 0 for t in ts):
        raise ValueError("t values must be positive")
    diagonalizable = graph_eigendata(g).diagonalizable
    s0 = spectral_dimension(g)

    def evaluate(t: float):
        direct = heat_trace_direct(g, t, eps)
        expansion = heat_trace_expansion(g, t, K) if diagonalizable and t < 1 else None
        return direct, expansion

    values = parallel_map(evaluate, ts)
    direct = tuple(v[0] for v in values)
    expansion = tuple(v[1] for v in values)
    residual = tuple(None if e is None else d - e for d, e in zip(direct, expansion))
    return HeatTraceReport(
        t=tuple(ts),
        direct=direct,
        expansion=expansion,
        residual=residual,
        scaled_direct=tuple(d * t ** (s0 / 2) for d, t in zip(direct, ts)),
        period=-2 * math.log(g.rho),
        leading_exponent=math.log(graph_eigendata(g).pf) / (2 * math.log(g.rho)),
        residual_limit=heat_residual_limit(g) if diagonalizable else None,
        log_coefficient=log_coefficient(g) if diagonalizable else None,
    )


def leading_heat_mean(g: BratteliGraph) -> float:
    """Period mean of the leading heat coefficient, C^1_H (1/r) Gamma(log pf / r)"""
    ed = _diagonal_data(g)
    r = -2 * math.log(g.rho)
    return float((ed.cH[0] * complex_gamma(math.log(ed.pf) / r) / r).real)


def mellin_cross_check(g: BratteliGraph) -> Tuple[float, float]:
    """(1/2 Gamma(s0/2) res(s0), period mean of the leading heat coefficient)"""
    s0 = spectral_dimension(g)
    lhs = 0.5 * complex_gamma(s0 / 2).real * leading_residue(g)
    return lhs, leading_heat_mean(g)


def log_slope_fit(ts: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ts)"""
    slope, _ = np.polyfit(np.log(np.asarray(ts, dtype=float)), np.log(np.asarray(values, dtype=float)), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# tensor products


def tensor_heat_trace(g1: BratteliGraph, g2: BratteliGraph, t: float, eps: Optional[float] = None) -> float:
    """The heat trace of a tensor product is the product of the traces"""
    return heat_trace_direct(g1, t, eps) * heat_trace_direct(g2, t, eps)


def tensor_heat_trace_double_sum(g1: BratteliGraph, g2: BratteliGraph, t: float,
                                 eps: Optional[float] = None) -> float:
    """Explicit double sum over level pairs, for cross-validation"""
    terms1 = _heat_terms(g1, t, eps)
    terms2 = _heat_terms(g2, t, eps)
    acc = KahanSum()
    for a in terms1:
        for b in terms2:
            acc.add(a * b)
    return acc.value


def _heat_terms(g: BratteliGraph, t: float, eps: Optional[float]) -> List[float]:
    eps = get_setting("heat_eps", eps)
    safety = get_setting("heat_safety")
    log_pf = math.log(graph_eigendata(g).pf)
    neg2_log_rho = -2 * math.log(g.rho)
    terms, total, n = [], 0.0, 0
    while n < 100000:
        n += 1
        count = horizontal_counts(g, n)[-1]
        energy = math.exp(min(n * neg2_log_rho, 700.0))
        term = math.exp(math.log(count) - t * energy) if count else 0.0
        terms.append(term)
        total += term
        if energy * t > 2 * n * log_pf and term <= eps * total / safety:
            break
    return terms


def tensor_dimension(g1: BratteliGraph, g2: BratteliGraph) -> float:
    """Metric dimensions add under tensor products"""
    return spectral_dimension(g1) + spectral_dimension(g2)


# ---------------------------------------------------------------------------
# spectral measure and states


def spectral_measure(g: BratteliGraph, word: PathWord) -> float:
    """mu([gamma]) = pf^{-|gamma|} R_{r(gamma)}"""
    if not word.edges:
        raise PathInvalid("spectral_measure needs a non-empty word")
    ed = graph_eigendata(g)
    end = g.range(word.edges[-1])
    return float(ed.pf ** (-len(word.edges)) * ed.R[g.vertex_index[end]])


def level_means(g: BratteliGraph, obs, N: int) -> List[complex]:
    """Mean of a diagonal observable over E_n for n = 1..N"""
    if isinstance(obs, LevelDiagonal):
        return [complex(obs.value(n)) for n in range(1, N + 1)]
    counts = horizontal_counts(g, N)
    if isinstance(obs, Cylinder):
        return _cylinder_means(g, obs, N, counts)
    return [observable_on_level(g, obs, n) / counts[n - 1] for n in range(1, N + 1)]


def _cylinder_means(g: BratteliGraph, obs: Cylinder, N: int, counts: List[int]) -> List[complex]:
    # level n > depth: words of E_n starting with gamma are counted by
    # (A^{n-1-depth} h)[r(gamma)] with h[w] = #{pairs with source vertex w}
    A = np.array(graph_matrix(g).tolist(), dtype=object)
    index = g.vertex_index
    hvec = np.zeros(len(g.vertices), dtype=np.int64).astype(object)
    for h in g.horizontal:
        hvec[index[g.source(h.first)]] += 1
    columns = [hvec]
    while len(columns) < max(1, N - obs.depth):
        columns.append(A.dot(columns[-1]))
    means = []
    for n in range(1, N + 1):
        if n - 1 < obs.depth:
            means.append(observable_on_level(g, obs, n) / counts[n - 1])
            continue
        column = columns[n - 1 - obs.depth]
        real_total, imag_total, covered = Fraction(0), Fraction(0), 0
        for gamma, value in obs.table.items():
            weight = int(column[index[g.range(gamma[-1])]])
            value = complex(value)
            real_total += Fraction(value.real) * weight
            imag_total += Fraction(value.imag) * weight
            covered += weight
        default = complex(obs.default)
        rest = counts[n - 1] - covered
        real_total += Fraction(default.real) * rest
        imag_total += Fraction(default.imag) * rest
        means.append(complex(float(real_total / counts[n - 1]), float(imag_total / counts[n - 1])))
    return means


def state_cesaro(g: BratteliGraph, obs, N: int) -> StateResult:
    """Level averages of a diagonal observable with Cauchy diagnostics over the last levels"""
    sequence = level_means(g, obs, N)
    window = get_setting("cauchy_window")
    diffs = cauchy_differences(sequence, window)
    value = sequence[-1]
    scale = max(1.0, abs(value))
    converged = len(diffs) >= window - 1 and all(d < get_setting("aitken_tol") * scale for d in diffs)
    if not converged:
        logger.info("Cesaro averages not converged after %d levels", N)
    return StateResult(value, tuple(sequence), tuple(diffs), converged)


def state_weights(g: BratteliGraph, obs, N: int) -> StateWeights:
    """Exact per-level weights of a diagonal observable"""
    counts = horizontal_counts(g, N)
    n = np.arange(1, N + 1, dtype=float)
    log_energies = -2 * n * math.log(g.rho)
    return StateWeights(
        log_energies=log_energies,
        log_dims=np.array([math.log(c) for c in counts]),
        means=np.array(level_means(g, obs, N), dtype=complex),
        a=spectral_dimension(g) / 2,
        log_cutoff=float(log_energies[-1]),
    )


def geometric_weights(pf: float, rho: float, n_max: int, phase: float = 0.0,
                      coefficient: float = 1.0) -> StateWeights:
    """Synthetic weights #E_n = coefficient * pf^n with means e^{i n phase}"""
    n = np.arange(1, n_max + 1, dtype=float)
    log_energies = -2 * n * math.log(rho)
    return StateWeights(
        log_energies=log_energies,
        log_dims=n * math.log(pf) + math.log(coefficient),
        means=np.exp(1j * phase * n),
        a=math.log(pf) / (-2 * math.log(rho)),
        log_cutoff=float(log_energies[-1]),
    )


def tensor_weights(w1: StateWeights, w2: StateWeights) -> StateWeights:
    """Weights of the product operator on the tensor product of two triples"""
    e1, e2 = w1.log_energies[:, None], w2.log_energies[None, :]
    return StateWeights(
        log_energies=np.logaddexp(e1, e2).ravel(),
        log_dims=(w1.log_dims[:, None] + w2.log_dims[None, :]).ravel(),
        means=(w1.means[:, None] * w2.means[None, :]).ravel(),
        a=w1.a + w2.a,
        log_cutoff=min(w1.log_cutoff, w2.log_cutoff),
    )


def _truncated_laplace(w: StateWeights, s: float) -> complex:
    # int_0^1 t^{a+s-1} sum_n mean_n dim_n e^{-t E_n} dt / Gamma(a+s)
    exponent = w.a + s
    energies = np.exp(np.minimum(w.log_energies, 700.0))
    log_terms = w.log_dims - exponent * w.log_energies
    shift = log_terms.max()
    weights = np.exp(log_terms - shift) * special.gammainc(exponent, energies)
    return complex(np.sum(w.means * weights)) * math.exp(shift)


def laplace_ratio_state(weights_A: StateWeights, weights_1: StateWeights,
                        s_grid: Optional[Sequence[float]] = None,
                        tol: Optional[float] = None) -> LaplaceRatioResult:
    """
    Estimate lim_{s->0+} L[f_A](s) / L[f](s) from truncated Laplace
    integrals on a decreasing s grid with repeated Richardson extrapolation.
    """
    tol = get_setting("laplace_tol", tol)
    if s_grid is None:
        # smallest s for which the missing levels weigh less than e^{-27.6}
        s_min = 27.6 / min(weights_A.log_cutoff, weights_1.log_cutoff)
        s_grid = [s_min * 2 ** k for k in range(3, -1, -1)]
    s_grid = sorted((float(s) for s in s_grid), reverse=True)
    ratios = [_truncated_laplace(weights_A, s) / _truncated_laplace(weights_1, s) for s in s_grid]

    table = [list(ratios)]
    for level in range(1, len(ratios)):
        prev = table[-1]
        row = []
        for i in range(len(prev) - 1):
            h0, h1 = s_grid[i], s_grid[i + level]
            row.append((h0 * prev[i + 1] - h1 * prev[i]) / (h0 - h1))
        table.append(row)
    value = table[-1][0]
    spread = abs(table[-1][0] - table[-2][-1]) if len(table) > 1 else float("inf")
    if spread > tol:
        raise InsufficientDecay(
            f"Laplace-ratio extrapolation spread {spread:.3g} exceeds tolerance {tol:.3g}",
            details={"value": value, "spread": spread},
        )
    return LaplaceRatioResult(complex(value), float(spread), tuple(s_grid), tuple(ratios))


# ---------------------------------------------------------------------------
# resonance and direct sums


def nonresonant_phase_check(phi: float, rho: float, rho_prime: float, kmax: Optional[int] = None,
                            tol: float = 1e-9) -> ResonanceCheck:
    """Scan phi + 2 pi k + 2 pi (log rho / log rho') k' for |k|, |k'| <= kmax"""
    kmax = int(get_setting("resonance_kmax", kmax))
    ratio = math.log(rho) / math.log(rho_prime)
    k_prime = np.arange(-kmax, kmax + 1)
    shifted = phi + 2 * math.pi * ratio * k_prime
    k = np.clip(np.rint(-shifted / (2 * math.pi)), -kmax, kmax)
    gaps = np.abs(shifted + 2 * math.pi * k)
    best = int(np.argmin(gaps))
    min_gap = float(gaps[best])
    witness = (int(k[best]), int(k_prime[best]))
    if min_gap <= tol * max(1.0, abs(phi)):
        return ResonanceCheck(True, witness, min_gap, kmax, f"resonant at (k, k')={witness}")
    return ResonanceCheck(False, witness, min_gap, kmax, f"non-resonant up to Kmax={kmax}")


def direct_sum_coefficients(abscissas: Sequence[float], residues: Sequence[float],
                            tol: float = 1e-12) -> List[float]:
    """c_i = residue_i when s0_i is the largest abscissa, else 0"""
    top = max(abscissas)
    return [float(r) if abs(s - top) <= tol * max(1.0, top) else 0.0
            for s, r in zip(abscissas, residues)]


def direct_sum_state(c1: float, c2: float, T1: complex, T2: complex) -> complex:
    """(c1 T1 + c2 T2)/(c1 + c2)"""
    if c1 < 0 or c2 < 0:
        raise ValueError("direct-sum coefficients must be non-negative")
    if c1 == 0 and c2 == 0:
        raise BothResiduesZero("both residues vanish")
    return (c1 * T1 + c2 * T2) / (c1 + c2)


def direct_sum(g1: BratteliGraph, g2: BratteliGraph, T1: complex, T2: complex) -> complex:
    """State of the direct sum of two triples from their zeta residues"""
    c1, c2 = direct_sum_coefficients(
        [spectral_dimension(g1), spectral_dimension(g2)],
        [leading_residue(g1), leading_residue(g2)],
    )
    return direct_sum_state(c1, c2, T1, T2)
