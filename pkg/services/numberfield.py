"""
Exact arithmetic in Q(theta) for an algebraic integer theta, Galois
conjugates, Pisot and unimodularity tests and the (reduced) star-map
values.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from core.config import get_setting
from core.errors import DivisionByZero, IrrationalityViolation, NotPisot, TooLarge
from services.eigen import characteristic_polynomial, perron_frobenius, polynomial_roots, sort_spectrum

logger = logging.getLogger(__name__)

_X = sympy.Symbol("x")

Scalar = Union[int, Fraction]


@dataclass(frozen=True)
class MinPoly:
    """Monic irreducible integer polynomial, coefficients from x^J down to x^0"""

    coefficients: Tuple[int, ...]

    def __post_init__(self):
        if not self.coefficients or self.coefficients[0] != 1:
            raise ValueError("minimal polynomial must be monic")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def constant_term(self) -> int:
        return self.coefficients[-1]

    @property
    def ascending(self) -> Tuple[int, ...]:
        return tuple(reversed(self.coefficients))

    def as_sympy(self) -> sympy.Poly:
        return sympy.Poly(list(self.coefficients), _X)

    def __str__(self) -> str:
        return str(self.as_sympy().as_expr())


@dataclass(frozen=True)
class PisotData:
    minpoly: MinPoly
    theta: float
    conjugates: Tuple[complex, ...]  # conjugates[0] is theta
    degree: int
    L: int
    pisot: bool
    unimodular: bool
    phases: Tuple[float, ...]  # alpha_j in [0, 2 pi) for 2 <= j <= L

    @property
    def theta2_modulus(self) -> Optional[float]:
        return abs(self.conjugates[1]) if self.degree > 1 else None

    def to_dict(self) -> Dict:
        return {
            "minpoly": str(self.minpoly),
            "theta": self.theta,
            "conjugates": list(self.conjugates),
            "degree": self.degree,
            "L": self.L,
            "pisot": self.pisot,
            "unimodular": self.unimodular,
            "phases": list(self.phases),
        }


# ---------------------------------------------------------------------------
# minimal polynomials


def pf_minimal_polynomial(A: np.ndarray, d: int = 1) -> MinPoly:
    """
    Irreducible integer factor whose root is theta = pf^{1/d}; for d > 1 the
    minimal polynomial of pf is substituted x -> x^d and factored again.
    """
    pf, _, _ = perron_frobenius(A)
    theta = pf ** (1.0 / d)
    _, factors = sympy.factor_list(characteristic_polynomial(A).as_expr(), _X)
    factor = _vanishing_factor([f for f, _ in factors], pf)
    if d > 1:
        substituted = sympy.expand(factor.subs(_X, _X ** d))
        _, factors = sympy.factor_list(substituted, _X)
        factor = _vanishing_factor([f for f, _ in factors], theta)
    poly = sympy.Poly(factor, _X)
    coeffs = [int(c) for c in poly.all_coeffs()]
    if coeffs[0] < 0:
        coeffs = [-c for c in coeffs]
    if len(coeffs) - 1 > get_setting("max_field_degree"):
        raise TooLarge(f"field degree {len(coeffs) - 1} exceeds {get_setting('max_field_degree')}")
    return MinPoly(tuple(coeffs))


def _vanishing_factor(factors: Sequence[sympy.Expr], root: float) -> sympy.Expr:
    def residual(f):
        coeffs = [float(c) for c in sympy.Poly(f, _X).all_coeffs()]
        scale = sum(abs(c) * root ** i for i, c in enumerate(reversed(coeffs)))
        return abs(np.polyval(coeffs, root)) / scale
    return min(factors, key=residual)


def minimal_polynomial_of_pf(A: np.ndarray, d: int = 1) -> MinPoly:
    """Minimal polynomial of theta = pf^{1/d}; rational theta is refused"""
    mp = pf_minimal_polynomial(A, d)
    if mp.degree == 1:
        raise IrrationalityViolation(
            f"theta = {-mp.constant_term} is rational; the Pisot pipeline needs an irrational dilation",
            details={"theta": -mp.constant_term},
        )
    return mp


def pisot_analyze(mp: MinPoly) -> PisotData:
    """Ordered conjugates, Pisot/unimodular flags, L and the subleading phases"""
    roots = [z for z, _ in polynomial_roots(mp.as_sympy())]
    tie = get_setting("conjugate_tie_tol")
    conjugates = sort_spectrum(roots)
    theta = conjugates[0]
    J = mp.degree
    L = 1
    if J > 1:
        m2 = abs(conjugates[1])
        L = 1 + sum(1 for z in conjugates[1:] if abs(abs(z) - m2) <= tie * max(1.0, m2))
    pisot = (J > 1 and abs(theta.imag) < 1e-12 and theta.real > 1
             and all(abs(z) < 1 for z in conjugates[1:]))
    phases = tuple(cmath.phase(z) % (2 * math.pi) for z in conjugates[1:L])
    if not pisot:
        logger.info("%s is not a Pisot polynomial", mp)
    return PisotData(
        minpoly=mp,
        theta=float(theta.real),
        conjugates=tuple(conjugates),
        degree=J,
        L=L,
        pisot=pisot,
        unimodular=abs(mp.constant_term) == 1,
        phases=phases,
    )


# ---------------------------------------------------------------------------
# the field


class NumberField:
    """Q(theta) with theta a root of a monic irreducible integer polynomial"""

    def __init__(self, minpoly: MinPoly, data: Optional[PisotData] = None):
        self.minpoly = minpoly
        self.data = data or pisot_analyze(minpoly)
        self.degree = minpoly.degree
        self.roots = self.data.conjugates
        self._power_sums = self._newton_power_sums(2 * self.degree)

    def _newton_power_sums(self, count: int) -> List[Fraction]:
        # p_k + a_1 p_{k-1} + ... + a_{k-1} p_1 + k a_k = 0, a_i from x^J + a_1 x^{J-1} + ...
        a = [Fraction(c) for c in self.minpoly.coefficients]
        J = self.degree
        sums = [Fraction(J)]
        for k in range(1, count + 1):
            total = Fraction(0)
            for i in range(1, min(k - 1, J) + 1):
                total += a[i] * sums[k - i]
            if k <= J:
                total += k * a[k]
            sums.append(-total)
        return sums

    def power_trace(self, k: int) -> Fraction:
        """Exact trace of theta^k for 0 <= k < J"""
        return self._power_sums[k]

    def element(self, coeffs: Sequence[Scalar]) -> "FieldElement":
        return FieldElement(self, coeffs)

    @property
    def zero(self) -> "FieldElement":
        return FieldElement(self, [0])

    @property
    def one(self) -> "FieldElement":
        return FieldElement(self, [1])

    @property
    def gen(self) -> "FieldElement":
        return FieldElement(self, [0, 1]) if self.degree > 1 else FieldElement(self, [-self.minpoly.constant_term])

    def __eq__(self, other) -> bool:
        return isinstance(other, NumberField) and other.minpoly == self.minpoly

    def __hash__(self) -> int:
        return hash(self.minpoly)

    def __repr__(self) -> str:
        return f"NumberField({self.minpoly})"


class FieldElement:
    """sum_i q_i theta^i with exact rational q_i, reduced modulo the minimal polynomial"""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: Sequence[Scalar]):
        self.field = field
        self.coeffs = _reduce([Fraction(c) for c in coeffs], field)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise ValueError("elements belong to different fields")
            return other
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.field, [other])
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        J = self.field.degree
        product = [Fraction(0)] * (2 * J - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        product[i + j] += a * b
        return FieldElement(self.field, product)

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise DivisionByZero("zero has no inverse in Q(theta)")
        if self.field.degree == 1:
            return FieldElement(self.field, [1 / self.coeffs[0]])
        expr = sum(sympy.Rational(c.numerator, c.denominator) * _X ** i for i, c in enumerate(self.coeffs))
        inv = sympy.invert(expr, self.field.minpoly.as_sympy().as_expr(), _X)
        coeffs = sympy.Poly(inv, _X, domain=sympy.QQ).all_coeffs()[::-1]
        return FieldElement(self.field, [Fraction(int(c.p), int(c.q)) for c in coeffs])

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        base = self if exponent >= 0 else self.inverse()
        n = abs(exponent)
        result = self.field.one
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.field.minpoly, self.coeffs))

    def __repr__(self) -> str:
        terms = " + ".join(f"({c})*theta^{i}" for i, c in enumerate(self.coeffs) if c)
        return f"FieldElement({terms or '0'})"

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def embed(self, j: int = 0) -> complex:
        """Value at the j-th conjugate; embed(0) is the value at theta itself"""
        return _horner(self.coeffs, self.field.roots[j])

    def embeddings(self) -> List[complex]:
        return [_horner(self.coeffs, z) for z in self.field.roots]

    def __float__(self) -> float:
        return float(self.embed(0).real)

    def trace(self) -> Fraction:
        """Exact sum of all conjugates"""
        return sum((c * self.field.power_trace(i) for i, c in enumerate(self.coeffs)), Fraction(0))

    def frac_phase(self) -> Fraction:
        """Fractional part of the exact trace"""
        tr = self.trace()
        return tr - (tr.numerator // tr.denominator)

    def phase_mod_one(self, conjugate_values: Optional[Sequence[complex]] = None) -> float:
        """
        Fractional part of the value at theta computed as
        frac(trace) - sum of the other conjugates.
        """
        frac = self.frac_phase()
        others = conjugate_values if conjugate_values is not None else self.embeddings()[1:]
        return (float(frac) - sum(others).real) % 1.0


def _reduce(coeffs: List[Fraction], field: NumberField) -> Tuple[Fraction, ...]:
    J = field.degree
    m = field.minpoly.ascending  # m_0 ... m_J with m_J = 1
    coeffs = list(coeffs) + [Fraction(0)] * max(0, J - len(coeffs))
    for k in range(len(coeffs) - 1, J - 1, -1):
        c = coeffs[k]
        if c:
            coeffs[k] = Fraction(0)
            for i in range(J):
                coeffs[k - J + i] -= c * m[i]
    return tuple(coeffs[:J])


def _horner(coeffs: Sequence[Fraction], z: complex) -> complex:
    value = 0j
    for c in reversed(coeffs):
        value = value * z + float(c)
    return value


# ---------------------------------------------------------------------------
# operations


def field_arith(a: FieldElement, b: Optional[FieldElement], op: str) -> FieldElement:
    """Dispatch for +, -, *, inverse"""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op in ("*", "x", "×"):
        return a * b
    if op == "inverse":
        return a.inverse()
    raise ValueError(f"unknown field operation {op!r}")


@dataclass(frozen=True)
class StarValues:
    full: complex
    reduced: complex


def _conjugate_values(p: FieldElement, pd: PisotData) -> List[complex]:
    return [_horner(p.coeffs, z) for z in pd.conjugates]


def star_values(p: FieldElement, pd: PisotData) -> StarValues:
    """sum_{j=2}^J p(theta_j) and sum_{j=2}^L p(theta_j)"""
    if not pd.pisot:
        raise NotPisot(f"{pd.minpoly} is not a Pisot polynomial")
    values = _conjugate_values(p, pd)
    return StarValues(full=sum(values[1:], 0j), reduced=sum(values[1:pd.L], 0j))


def reduced_star_energy(p: FieldElement, pd: PisotData) -> float:
    """sum_{j=2}^L |p(theta_j)|^2"""
    if not pd.pisot:
        raise NotPisot(f"{pd.minpoly} is not a Pisot polynomial")
    values = _conjugate_values(p, pd)
    return float(sum(abs(v) ** 2 for v in values[1:pd.L]))


def power_phase(p: FieldElement, n: int) -> float:
    """
    frac(p(theta) theta^n) from the exact trace of p theta^n minus the
    conjugate terms p(theta_j) theta_j^n, which stay small for Pisot theta.
    """
    exact = p * p.field.gen ** n
    base = p.embeddings()
    conj = [base[j] * p.field.roots[j] ** n for j in range(1, p.field.degree)]
    return exact.phase_mod_one(conj)


def kernel_vector(matrix: Sequence[Sequence[FieldElement]]) -> List[FieldElement]:
    """A non-zero vector of a one-dimensional kernel, by exact Gaussian elimination"""
    rows = [list(r) for r in matrix]
    m = len(rows[0])
    field = rows[0][0].field
    pivots: List[int] = []
    r = 0
    for col in range(m):
        pivot = next((i for i in range(r, len(rows)) if not rows[i][col].is_zero()), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = rows[r][col].inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][col].is_zero():
                factor = rows[i][col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(m) if c not in pivots]
    if not free:
        raise ValueError("matrix has a trivial kernel")
    vec = [field.zero for _ in range(m)]
    vec[free[0]] = field.one
    for i, col in enumerate(pivots):
        vec[col] = -rows[i][free[0]]
    return vec
