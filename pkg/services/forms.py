"""
Observables on path space and the level-n quadratic forms

    q_n(f, h) = 1/#E_n sum_{e in E_n} conj(delta_e f) delta_e h,
    delta_e f = (f(r(e)) - f(s(e))) / rho^n,

with their limits, the Markov contraction check and the dyadic circle
example.
"""

import cmath
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.config import get_setting
from core.errors import DepthExceeded, WrongGraph
from core.utils import aitken_extrapolate, cauchy_differences
from services.graph_core import (
    TAU_EXTENDED,
    BratteliGraph,
    PathWord,
    enumerate_horizontal,
    enumerate_paths,
    tau_extend,
)

logger = logging.getLogger(__name__)


class ObservableFn(ABC):
    """A function on path space evaluated on tau-extended words"""

    depth: int

    @abstractmethod
    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        pass

    def evaluate_many(self, g: BratteliGraph, words: Sequence[PathWord]) -> np.ndarray:
        return np.array([self.evaluate(g, w) for w in words], dtype=complex)


@dataclass(frozen=True)
class Cylinder(ObservableFn):
    """Locally constant function given by a table on paths of length depth"""

    depth: int
    table: Mapping[Tuple[str, ...], complex]
    default: complex = 0.0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("cylinder functions need depth >= 1")
        for key in self.table:
            if len(key) != self.depth:
                raise ValueError(f"table key {key} does not have length {self.depth}")

    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        return self.table.get(tuple(word.edges[:self.depth]), self.default)

    @classmethod
    def indicator(cls, gamma: Sequence[str]) -> "Cylinder":
        return cls(len(gamma), {tuple(gamma): 1.0})

    @classmethod
    def constant(cls, g: BratteliGraph, value: complex, depth: int = 1) -> "Cylinder":
        return cls(depth, {path: value for path in enumerate_paths(g, depth)})

    @classmethod
    def random(cls, g: BratteliGraph, depth: int, rng: np.random.Generator,
               low: float = -2.0, high: float = 2.0) -> "Cylinder":
        return cls(depth, {path: float(rng.uniform(low, high)) for path in enumerate_paths(g, depth)})


@dataclass(frozen=True)
class Sampled(ObservableFn):
    """Arbitrary evaluator on tau-extended words"""

    func: Callable[[PathWord], complex]
    depth: int = 1

    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        return self.func(word)


@dataclass(frozen=True)
class CircleTrig(ObservableFn):
    """Trigonometric polynomial sum_k c_k e^{2 pi i k x} pulled back to a dyadic graph"""

    coefficients: Mapping[int, complex]
    depth: int = 0

    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        x = circle_embed(g, word)
        return sum(c * cmath.exp(2j * math.pi * k * x) for k, c in self.coefficients.items())

    def at_points(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=complex)
        for k, c in self.coefficients.items():
            out += c * np.exp(2j * np.pi * k * x)
        return out

    @property
    def max_frequency(self) -> int:
        return max((abs(k) for k in self.coefficients), default=0)


@dataclass(frozen=True)
class EigenFn(ObservableFn):
    """
    exp(2 pi i beta x(word)) where locate maps a word to an exact position
    in Q(theta); the phase is reduced mod 1 exactly.
    """

    beta: object  # FieldElement
    locate: Callable[[PathWord], object]
    depth: int = 1

    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        phase = (self.beta * self.locate(word)).phase_mod_one()
        return cmath.exp(2j * math.pi * phase)


@dataclass(frozen=True)
class Clipped(ObservableFn):
    """Composition of a real observable with the unit contraction g_eps"""

    inner: ObservableFn
    eps: float

    @property
    def depth(self) -> int:
        return self.inner.depth

    def evaluate(self, g: BratteliGraph, word: PathWord) -> complex:
        return clip_contraction(self.inner.evaluate(g, word).real, self.eps)


@dataclass(frozen=True)
class FormReport:
    values: Tuple[complex, ...]
    limit: Optional[complex]
    converged: bool
    cauchy: Tuple[float, ...]
    verdict: str

    def rows(self) -> List[Tuple[int, complex]]:
        return [(n, q) for n, q in enumerate(self.values, start=1)]


@dataclass(frozen=True)
class MarkovResult:
    holds: bool
    q_original: float
    q_clipped: float


# ---------------------------------------------------------------------------
# circle embedding


def is_dyadic(g: BratteliGraph) -> bool:
    """One vertex carrying exactly two loop edges"""
    return len(g.vertices) == 1 and len(g.edges) == 2


def circle_embed(g: BratteliGraph, word: PathWord) -> float:
    """x = sum_i gamma_i 2^{-i}, the star edge being digit 0"""
    if not is_dyadic(g):
        raise WrongGraph("circle embedding needs a one-vertex graph with two loops")
    x = 0.0
    for i, e in enumerate(word.edges, start=1):
        if e != g.star_edge:
            x += 2.0 ** (-i)
    return x


def circle_dirichlet_energy(coefficients: Mapping[int, complex]) -> float:
    """int_0^1 |f'|^2 = sum_k (2 pi k)^2 |c_k|^2"""
    return sum((2 * math.pi * k) ** 2 * abs(c) ** 2 for k, c in coefficients.items())


# ---------------------------------------------------------------------------
# quadratic forms


def _level_words(g: BratteliGraph, n: int, depth: int):
    for prefix, pair in enumerate_horizontal(g, n):
        src = tau_extend(g, PathWord(prefix + (pair.first,), TAU_EXTENDED), depth)
        rng = tau_extend(g, PathWord(prefix + (pair.second,), TAU_EXTENDED), depth)
        yield src, rng


def observable_on_level(g: BratteliGraph, obs: ObservableFn, n: int) -> complex:
    """sum over e in E_n of obs(s(e))"""
    depth = max(n, obs.depth)
    sources = [src for src, _ in _level_words(g, n, depth)]
    return complex(obs.evaluate_many(g, sources).sum())


def _deltas(g: BratteliGraph, f: ObservableFn, n: int, depth: int) -> np.ndarray:
    pairs = list(_level_words(g, n, depth))
    src = f.evaluate_many(g, [p[0] for p in pairs])
    rng = f.evaluate_many(g, [p[1] for p in pairs])
    return (rng - src) / g.rho ** n


def _dyadic_trig_deltas(g: BratteliGraph, f: CircleTrig, n: int) -> Optional[np.ndarray]:
    # E_n: prefixes with values k 2^{-(n-1)} and the two ordered pairs at digit n
    if len(g.horizontal) != 2:
        return None
    base = np.arange(2 ** (n - 1), dtype=float) * 2.0 ** (-(n - 1))
    step = 2.0 ** (-n)
    forward = (f.at_points(base + step) - f.at_points(base)) / g.rho ** n
    return np.concatenate([forward, -forward])


def qn_form(g: BratteliGraph, f: ObservableFn, h: ObservableFn, n: int) -> complex:
    """Level-n quadratic form by exact enumeration of E_n"""
    if n < 1:
        raise ValueError("qn_form needs n >= 1")
    if n > get_setting("form_max_depth"):
        raise DepthExceeded(f"level {n} exceeds the enumeration cap {get_setting('form_max_depth')}")
    df = dh = None
    if isinstance(f, CircleTrig) and isinstance(h, CircleTrig) and is_dyadic(g):
        df = _dyadic_trig_deltas(g, f, n)
        dh = _dyadic_trig_deltas(g, h, n)
    if df is None or dh is None:
        depth = max(n, f.depth, h.depth)
        df = _deltas(g, f, n, depth)
        dh = df if h is f else _deltas(g, h, n, depth)
    if len(df) == 0:
        return 0j
    products = np.conj(df) * dh
    return complex(math.fsum(products.real), math.fsum(products.imag)) / len(df)


def q_limit(g: BratteliGraph, f: ObservableFn, h: ObservableFn, N: int) -> FormReport:
    """q_n for n <= N, Aitken-extrapolated limit and a convergence verdict"""
    values = [qn_form(g, f, h, n) for n in range(1, N + 1)]
    diffs = cauchy_differences(values, 4)
    last = values[-1]
    scale = max(1.0, abs(last))
    converged = len(diffs) == 3 and all(d < get_setting("aitken_tol") * scale for d in diffs)
    limit: Optional[complex] = None
    if converged:
        re = aitken_extrapolate([v.real for v in values])
        im = aitken_extrapolate([v.imag for v in values])
        limit = complex(last.real if re is None else re, last.imag if im is None else im)
        verdict = "converged"
    elif len(values) >= 3 and all(abs(b) > 1.5 * abs(a) > 0 for a, b in zip(values[-3:], values[-2:])):
        verdict = "diverging"
    else:
        verdict = "no-convergence"
    if not converged:
        logger.info("q_n did not converge within %d levels (%s)", N, verdict)
    return FormReport(tuple(values), limit, converged, tuple(diffs), verdict)


# ---------------------------------------------------------------------------
# Markov property


def clip_contraction(t: float, eps: float) -> float:
    """
    C^1 unit contraction: identity on [0, 1], values in [-eps, 1 + eps],
    0 <= g(t') - g(t) <= t' - t for t <= t'.
    """
    if 0.0 <= t <= 1.0:
        return t
    if t > 1.0:
        u = t - 1.0
        return 1.0 + eps if u >= 2 * eps else 1.0 + u - u * u / (4 * eps)
    u = -t
    return -eps if u >= 2 * eps else -u + u * u / (4 * eps)


def markov_check(g: BratteliGraph, f: ObservableFn, n: int, eps: Optional[float] = None) -> MarkovResult:
    """q_n(g_eps o f) <= q_n(f) for a real observable"""
    eps = get_setting("markov_eps", eps)
    q_f = qn_form(g, f, f, n).real
    clipped = Clipped(f, eps)
    q_c = qn_form(g, clipped, clipped, n).real
    holds = q_c <= q_f * (1 + 1e-12) + 1e-300
    return MarkovResult(holds, q_f, q_c)
