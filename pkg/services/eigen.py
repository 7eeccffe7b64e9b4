"""
Spectral data of small integer graph matrices.

Eigenvalues are roots of the exact integer characteristic polynomial:
linear factors give exact rational roots, the others are located with
sympy and polished by Newton iteration in mpmath. Left and right
eigenvector bases are biorthonormal, and the Perron-Frobenius block is
normalized so that sum(R) = 1 and sum(R * L) = 1.
"""

import cmath
import functools
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import sympy
from scipy import linalg

from core.config import get_setting
from core.errors import NonPrimitive, NotDiagonalizable, TooLarge
from services.graph_core import BratteliGraph, graph_matrix, is_primitive

logger = logging.getLogger(__name__)

_X = sympy.Symbol("x")


@dataclass(frozen=True)
class EigenData:
    eigenvalues: Tuple[complex, ...]
    multiplicities: Tuple[int, ...]
    right_basis: Tuple[np.ndarray, ...]  # per eigenvalue, columns R^{j,l}
    left_basis: Tuple[np.ndarray, ...]  # per eigenvalue, columns L^{j,l}
    pf: float
    R: np.ndarray
    L: np.ndarray
    diagonalizable: bool
    char_poly: Tuple[int, ...]  # descending integer coefficients
    cH: Tuple[complex, ...] = ()
    c_zero: complex = 0j  # level-1 weight of the eigenvalue 0

    def to_dict(self):
        return {
            "eigenvalues": list(self.eigenvalues),
            "multiplicities": list(self.multiplicities),
            "pf": self.pf,
            "R": self.R,
            "L": self.L,
            "diagonalizable": self.diagonalizable,
            "char_poly": list(self.char_poly),
            "cH": list(self.cH),
            "c_zero": self.c_zero,
        }


def characteristic_polynomial(A: np.ndarray) -> sympy.Poly:
    """Exact characteristic polynomial det(xI - A) over the integers"""
    matrix = sympy.Matrix(np.asarray(A).tolist())
    return matrix.charpoly(_X)


def refine_root(poly: sympy.Poly, guess: complex, dps: Optional[int] = None) -> complex:
    """Newton-polish a root of an integer polynomial with mpmath"""
    coeffs = [int(c) for c in poly.all_coeffs()]
    with mpmath.workdps(get_setting("root_dps", dps)):
        f = lambda z: mpmath.polyval(coeffs, z)
        try:
            root = mpmath.findroot(f, mpmath.mpc(guess), solver="newton",
                                   tol=mpmath.mpf(10) ** (-2 * mpmath.mp.dps // 3))
        except (ValueError, ZeroDivisionError):
            root = mpmath.mpc(guess)
        return complex(root)


def polynomial_roots(poly: sympy.Poly) -> List[Tuple[complex, int]]:
    """
    Distinct roots with multiplicities from the exact factorization.

    Conjugate pairs are snapped so that one root is exactly the conjugate
    of the other.
    """
    _, factors = sympy.factor_list(poly.as_expr(), _X)
    roots: List[Tuple[complex, int]] = []
    for factor, mult in factors:
        fpoly = sympy.Poly(factor, _X)
        if fpoly.degree() == 1:
            a, b = fpoly.all_coeffs()
            roots.append((complex(float(sympy.Rational(-b, a))), mult))
            continue
        approx = [complex(r) for r in fpoly.nroots(n=30, maxsteps=200)]
        polished = [refine_root(fpoly, z) for z in approx]
        for z in _snap_conjugates(polished):
            roots.append((z, mult))
    return roots


def _snap_conjugates(values: Sequence[complex]) -> List[complex]:
    out = list(values)
    scale = max((abs(z) for z in out), default=1.0) or 1.0
    used = set()
    for i, z in enumerate(out):
        if abs(z.imag) <= 1e-14 * scale:
            out[i] = complex(z.real, 0.0)
            used.add(i)
    for i, z in enumerate(out):
        if i in used or z.imag < 0:
            continue
        partner = min(
            (j for j in range(len(out)) if j not in used and j != i and out[j].imag < 0),
            key=lambda j: abs(out[j] - z.conjugate()),
            default=None,
        )
        if partner is not None:
            out[partner] = z.conjugate()
            used.update((i, partner))
    return out


def order_key_compare(a: complex, b: complex, tol: float = 1e-9) -> int:
    """Descending modulus, ties by ascending principal argument"""
    ma, mb = abs(a), abs(b)
    if abs(ma - mb) > tol * max(1.0, ma, mb):
        return -1 if ma > mb else 1
    pa, pb = cmath.phase(a), cmath.phase(b)
    return (pa > pb) - (pa < pb)


def sort_spectrum(values: Sequence[complex]) -> List[complex]:
    return sorted(values, key=functools.cmp_to_key(order_key_compare))


def _null_space(M: np.ndarray, tol: float) -> np.ndarray:
    """Columns spanning the numerical kernel of M (singular values <= tol)"""
    _, s, vh = linalg.svd(M)
    k = int((s <= tol).sum())
    return vh[len(s) - k:].conj().T


def eigen_decompose(A: np.ndarray) -> EigenData:
    """
    Eigenvalues with multiplicities, biorthonormal eigenvector bases and
    normalized Perron-Frobenius data of a primitive matrix.
    """
    A = np.asarray(A)
    dim = A.shape[0]
    if dim > get_setting("max_matrix_dim"):
        raise TooLarge(f"matrix dimension {dim} exceeds {get_setting('max_matrix_dim')}")
    primitivity = is_primitive(A)
    if not primitivity.primitive:
        raise NonPrimitive(f"matrix is not primitive: {primitivity.certificate}")

    poly = characteristic_polynomial(A)
    roots = polynomial_roots(poly)
    mult_of = {}
    for z, m in roots:
        mult_of[z] = m
    ordered = sort_spectrum(list(mult_of))

    Af = A.astype(float)
    tol = get_setting("rank_tol") * max(1.0, float(np.linalg.norm(Af, 2)))
    identity = np.identity(dim)
    right, left = {}, {}
    diagonalizable = True
    for lam in ordered:
        if lam.imag != 0 and lam.conjugate() in right:
            right[lam] = right[lam.conjugate()].conj()
            left[lam] = left[lam.conjugate()].conj()
            continue
        shifted = Af.astype(complex) - lam * identity if lam.imag else Af - lam.real * identity
        R_block = _null_space(shifted, tol)
        L_block = _null_space(shifted.T, tol)
        k = min(R_block.shape[1], L_block.shape[1])
        if k != mult_of[lam]:
            diagonalizable = False
        if k == 0:
            logger.warning("No eigenvector found for eigenvalue %s", lam)
            R_block = np.zeros((dim, 0))
            L_block = np.zeros((dim, 0))
        else:
            R_block, L_block = R_block[:, :k], L_block[:, :k]
            gram = L_block.T @ R_block
            L_block = L_block @ np.linalg.inv(gram).T
        right[lam], left[lam] = R_block, L_block

    pf = ordered[0].real
    R = np.real(right[ordered[0]][:, 0])
    R = R / R.sum()
    L = np.real(left[ordered[0]][:, 0])
    L = L / float(R @ L)
    right[ordered[0]] = R.reshape(dim, 1)
    left[ordered[0]] = L.reshape(dim, 1)
    if not diagonalizable:
        logger.warning("Matrix %s is not diagonalizable", A.tolist())

    return EigenData(
        eigenvalues=tuple(ordered),
        multiplicities=tuple(mult_of[z] for z in ordered),
        right_basis=tuple(right[z] for z in ordered),
        left_basis=tuple(left[z] for z in ordered),
        pf=float(pf),
        R=R,
        L=L,
        diagonalizable=diagonalizable,
        char_poly=tuple(int(c) for c in poly.all_coeffs()),
    )


def perron_frobenius(A: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """(pf, R, L) with sum(R) = 1 and sum(R * L) = 1"""
    ed = eigen_decompose(A)
    return ed.pf, ed.R, ed.L


def c_coefficients(ed: EigenData, g: BratteliGraph, horizontal=None) -> Tuple[complex, ...]:
    """
    C^j_H = (1/lambda_j) sum_l (sum_v R^{j,l}_v) (sum_h L^{j,l}_{s^2(h)}).

    The eigenvalue 0 gets C = 0; its share of #E_1 is level_one_correction.
    """
    if not ed.diagonalizable:
        raise NotDiagonalizable("C^j_H needs a diagonalizable graph matrix")
    out = []
    for lam, R_block, L_block in zip(ed.eigenvalues, ed.right_basis, ed.left_basis):
        if _is_zero(lam):
            out.append(0j)
            continue
        c = _block_weight(g, R_block, L_block, horizontal) / lam
        out.append(complex(c.real, 0.0) if lam.imag == 0 else c)
    return tuple(out)


def level_one_correction(ed: EigenData, g: BratteliGraph, horizontal=None) -> complex:
    """
    D_0 = sum_l (sum_v R^{0,l}_v) (sum_h L^{0,l}_{s^2(h)}) over the kernel of A.

    A^0 = I still holds the projector on the kernel, so
    #E_n = sum_j C^j_H lambda_j^n + [n = 1] D_0.
    """
    if not ed.diagonalizable:
        raise NotDiagonalizable("C^j_H needs a diagonalizable graph matrix")
    total = 0j
    for lam, R_block, L_block in zip(ed.eigenvalues, ed.right_basis, ed.left_basis):
        if _is_zero(lam):
            total += _block_weight(g, R_block, L_block, horizontal)
    return complex(total.real, 0.0)


def closed_count(ed: EigenData, n: int) -> complex:
    """#E_n from the coefficients: sum_j C^j_H lambda_j^n, plus D_0 at n = 1"""
    if n < 1:
        raise ValueError("closed_count requires n >= 1")
    total = sum((c * lam ** n for c, lam in zip(ed.cH, ed.eigenvalues)), 0j)
    return total + (ed.c_zero if n == 1 else 0j)


def _is_zero(lam: complex) -> bool:
    return abs(lam) <= 1e-12


def _block_weight(g: BratteliGraph, R_block: np.ndarray, L_block: np.ndarray, horizontal) -> complex:
    pairs = g.horizontal if horizontal is None else horizontal
    index = g.vertex_index
    sources = [index[g.source(h.first)] for h in pairs]
    total = 0j
    for l in range(R_block.shape[1]):
        total += complex(R_block[:, l].sum()) * complex(sum(L_block[s, l] for s in sources))
    return total


def graph_eigendata(g: BratteliGraph) -> EigenData:
    """Eigen data of the graph matrix with C^j_H filled in when available"""
    if "eigen" in g._cache:
        return g._cache["eigen"]
    ed = eigen_decompose(graph_matrix(g))
    if ed.diagonalizable:
        ed = replace(ed, cH=c_coefficients(ed, g), c_zero=level_one_correction(ed, g))
    g._cache["eigen"] = ed
    return ed


def reconstruct_power(ed: EigenData, n: int) -> np.ndarray:
    """sum_j lambda_j^n R^j (L^j)^T"""
    dim = ed.R.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for lam, R_block, L_block in zip(ed.eigenvalues, ed.right_basis, ed.left_basis):
        out += (lam ** n) * (R_block @ L_block.T)
    return out


def biorthonormality_error(ed: EigenData) -> float:
    """Max deviation of the pairing of all left and right basis vectors from the identity"""
    R_all = np.hstack([b.astype(complex) for b in ed.right_basis])
    L_all = np.hstack([b.astype(complex) for b in ed.left_basis])
    gram = L_all.T @ R_all
    return float(np.max(np.abs(gram - np.identity(gram.shape[0]))))
