"""Combinatorial and linear-algebra identities behind the rigidity arguments.

* falling-factorial expansion of rho(k) = prod_{i=1}^l (k+m+i)
* the resonant sum C(A, B) and its rearrangement with coefficient d_l
* the coefficient matrix whose nonsingularity forces a polynomial symbol to be constant
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

from mpmath import mp, mpc, mpf

from .numerics import FACTORIALS, PiPoly, PrecComplex, as_mpc, guard_bits
from .symbols import EXP, HoloSymbol, as_symbol, series_coefficients

MAX_FALLING_L = 30
RESONANT_TERM_CAP = 100000
ROW_PROBE = 64


class ResonanceError(ValueError):
    """conj(AB) is not symbolically a multiple of 2*pi*i."""


# ---------------------------------------------------------------------------
# Falling-factorial expansion
# ---------------------------------------------------------------------------

def falling(k: int, i: int) -> int:
    """k (k-1) ... (k-i+1); 1 for i = 0."""
    out = 1
    for t in range(i):
        out *= k - t
    return out


def rho(k: int, l: int, m: int) -> int:
    out = 1
    for i in range(1, l + 1):
        out *= k + m + i
    return out


@dataclass(frozen=True)
class FallingExpansion:
    l: int
    m: int
    C: tuple[int, ...]

    def rho(self, k: int) -> int:
        return rho(k, self.l, self.m)

    def evaluate(self, k: int) -> int:
        return sum(c * falling(k, i) for i, c in enumerate(self.C))

    def reconstructs(self, upto: int | None = None) -> bool:
        upto = 2 * self.l if upto is None else upto
        return all(self.evaluate(k) == self.rho(k) for k in range(upto + 1))

    def expansion_holds(self) -> bool:
        """rho(l) = sum_i C_i l!/(l-i)!."""
        l = self.l
        return self.rho(l) == sum(c * (factorial(l) // factorial(l - i)) for i, c in enumerate(self.C))


def falling_expand(l: int, m: int) -> FallingExpansion:
    """Coefficients of rho in the basis k(k-1)...(k-i+1), from forward differences: C_i = Delta^i rho(0) / i!."""
    if not 1 <= l <= MAX_FALLING_L:
        raise ValueError(f"l must lie in [1, {MAX_FALLING_L}]")
    if m < 0:
        raise ValueError("m must be nonnegative")
    vals = [rho(k, l, m) for k in range(l + 1)]
    C = []
    for i in range(l + 1):
        C.append(vals[0] // factorial(i))
        vals = [b - a for a, b in zip(vals, vals[1:])]
    return FallingExpansion(l, m, tuple(C))


def d_l(l: int, m: int) -> int:
    """Coefficient of (conj(AB))^l in the rearranged C(A, B): 1 - (l+m)!/(l! m!)."""
    return 1 - comb(l + m, l)


def d_l_from_expansion(l: int, m: int) -> Fraction:
    """The same coefficient assembled from the expansion: C(2l+m, l) - C(l+m, l) - sum_{i<l} C_i/(l-i)!."""
    C = falling_expand(l, m).C
    return Fraction(comb(2 * l + m, l) - comb(l + m, l)) - sum(
        (Fraction(C[i], factorial(l - i)) for i in range(l)), Fraction(0)
    )


# ---------------------------------------------------------------------------
# The resonant sum C(A, B)
# ---------------------------------------------------------------------------

def _resonant_x(A, B) -> PrecComplex:
    A = PrecComplex.coerce(A)
    B = PrecComplex.coerce(B)
    if A.is_zero() or B.is_zero():
        raise ValueError("A and B must be nonzero")
    x = (A * B).conjugate()
    if x.two_pi_i_multiple() is None:
        raise ResonanceError("e^{conj(AB)} = 1 must hold exactly; give A and B as exact literals with conj(AB) in 2*pi*i*Z")
    return x


def _check_lm(l: int, m: int) -> None:
    if l < 1:
        raise ValueError("l must be at least 1")
    if m < 0:
        raise ValueError("m must be nonnegative")


def lemma_ll1_C(A, B, l: int, m: int) -> PrecComplex:
    """C(A,B) = sum_{k>=0} m!/k! (k+l+m)!/(k+m)! x^k - sum_{k<=l} m!/k! (l+m)!^2/((k+m)!(l-k+m)!) x^k, x = conj(AB).

    The infinite sum is truncated once the ratio test bounds the tail below the
    working precision.
    """
    _check_lm(l, m)
    x = _resonant_x(A, B).value
    F = FACTORIALS
    ax = abs(x)
    with guard_bits(32 + int(2.9 * float(ax))):
        tol = mpf(2) ** (-mp.prec)
        total = mpc(0)
        term = mpc(F[m]) * rho(0, l, m)  # k = 0
        k = 0
        while True:
            total += term
            nxt_ratio = ax * rho(k + 1, l, m) / ((k + 1) * rho(k, l, m))
            term = term * x * rho(k + 1, l, m) / ((k + 1) * rho(k, l, m))
            k += 1
            if nxt_ratio < 0.5 and abs(term) * 2 <= tol * max(abs(total), 1):
                break
            if k > RESONANT_TERM_CAP:
                raise ArithmeticError("resonant sum did not converge")
        fl = F[l + m]
        for k in range(l + 1):
            total -= mpf(F[m]) * fl * fl / (F[k] * F[k + m] * F[l - k + m]) * x ** k
    return PrecComplex(+total)


def resonant_sum_rearranged(A, B, l: int, m: int) -> PrecComplex:
    """D_2 - D_3 + m! d_l x^l, evaluated exactly in x = conj(AB)."""
    _check_lm(l, m)
    x = _resonant_x(A, B).exact
    F = FACTORIALS
    C = falling_expand(l, m).C
    xp = [PiPoly.rational(1)]
    for _ in range(2 * l):
        xp.append(xp[-1] * x)

    def q(v) -> PiPoly:
        return PiPoly.rational(v)

    total = PiPoly()
    # D_2
    for k in range(1, l):
        coef = Fraction(F[m], F[k]) * (
            Fraction(F[k + l + m], F[k + m]) - Fraction(F[l + m] * F[l + m], F[k + m] * F[l - k + m])
        )
        total = total + q(coef) * xp[k]
    # D_3
    for i in range(l - 1):
        inner = PiPoly()
        for k in range(1, l - i):
            inner = inner + q(Fraction(1, F[k])) * xp[k]
        total = total - q(F[m] * C[i]) * inner * xp[i]
    total = total + q(F[m] * d_l(l, m)) * xp[l]
    return PrecComplex(exact=total)


def resonant_pair(A, n: int) -> tuple[PrecComplex, PrecComplex]:
    """(A, B) with conj(AB) = 2*pi*i*n exactly, for a nonzero Gaussian-rational A."""
    A = PrecComplex.coerce(A)
    ex = A.exact
    if ex is None or set(ex.terms) - {0} or ex.is_zero():
        raise ValueError("A must be a nonzero Gaussian rational")
    a, b = ex.terms[0]
    norm = a * a + b * b
    # conj(B) = 2 pi i n / conj(A) = 2 pi i n A / |A|^2
    cb_re, cb_im = -2 * n * b / norm, 2 * n * a / norm
    return A, PrecComplex(exact=PiPoly({1: (cb_re, -cb_im)}))


# ---------------------------------------------------------------------------
# Coefficient matrix for polynomial symbols
# ---------------------------------------------------------------------------

def _exact_series(f: HoloSymbol, m: int, degree: int) -> list[PiPoly] | None:
    """Taylor coefficients as exact values when every parameter is an exact Gaussian rational."""
    for c, a in f.terms:
        for v in (c, a.A):
            if v.exact is None or set(v.exact.terms) - {0}:
                return None
    out = [PiPoly() for _ in range(degree + 1)]
    for coef, atom in f.terms:
        step = atom.A.exact if atom.kind == EXP else atom.A.exact.conjugate()
        term = coef.exact
        for k in range(degree - atom.power + 1):
            if k:
                denom = k if atom.kind == EXP else k + m
                term = term * step * PiPoly.rational(Fraction(1, denom))
            out[atom.power + k] = out[atom.power + k] + term
    return out


def _is_zero(x) -> bool:
    return x.is_zero() if isinstance(x, PiPoly) else x == 0


def _to_mpc(x) -> mpc:
    return x.to_mpc() if isinstance(x, PiPoly) else as_mpc(x)


@dataclass(frozen=True)
class CoefficientMatrix:
    lambdas: tuple[int, ...]
    rows: tuple[tuple, ...]
    det: object
    exact: bool
    construction: str = "given"

    @property
    def det_value(self) -> mpc:
        return _to_mpc(self.det)

    @property
    def nonsingular(self) -> bool:
        return not _is_zero(self.det) if self.exact else abs(self.det_value) > mpf(2) ** (-mp.prec // 2)

    def forces_constant(self) -> bool:
        """BX = 0 with det B != 0 leaves only X = 0: every nonconstant coefficient of p vanishes."""
        return self.nonsingular


class _Coeffs:
    def __init__(self, f: HoloSymbol, m: int, degree: int):
        ex = _exact_series(f, m, degree)
        self.exact = ex is not None
        self.b = ex if ex is not None else list(series_coefficients(f, m, degree).coeffs)
        self.m = m

    def entry(self, lam: int, i: int):
        F = FACTORIALS
        w = F[lam + i + self.m] // F[lam + self.m]
        return self.b[lam + i] * PiPoly.rational(w) if self.exact else self.b[lam + i] * w

    def row(self, lam: int, N1: int) -> tuple:
        return tuple(self.entry(lam, i) for i in range(1, N1 + 1))


def _det(rows: list[list], exact: bool):
    n = len(rows)
    M = [list(r) for r in rows]
    if not exact:
        return mp.det(mp.matrix([[_to_mpc(x) for x in r] for r in M])) if n else mpc(1)
    det = PiPoly.rational(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if not M[r][col].is_zero()), None)
        if piv is None:
            return PiPoly()
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        inv = M[col][col].inverse()
        if inv is None:
            # pivot mixes powers of pi; fall back to the numeric determinant
            return None
        det = det * M[col][col]
        for r in range(col + 1, n):
            if M[r][col].is_zero():
                continue
            factor = M[r][col] * inv
            M[r] = [a - factor * b for a, b in zip(M[r], M[col])]
    return det


def lemma_ll6_matrix(f, m: int, N1: int, lambdas=None, probe: int = ROW_PROBE) -> CoefficientMatrix:
    """Rows b_{lam+i} (lam+i+m)!/(lam+m)!, i = 1..N1, for each chosen lam.

    Without explicit ``lambdas`` the rows come from :func:`coefficient_row_search`.
    """
    f = as_symbol(f)
    if N1 < 1:
        raise ValueError("N1 must be positive")
    if lambdas is None:
        return coefficient_row_search(f, m, N1, probe)
    lambdas = tuple(int(x) for x in lambdas)
    if len(lambdas) != N1 or len(set(lambdas)) != N1 or min(lambdas) < 0:
        raise ValueError("lambdas must be N1 distinct nonnegative integers")
    coeffs = _Coeffs(f, m, max(lambdas) + N1)
    rows = [coeffs.row(lam, N1) for lam in lambdas]
    return _assemble(rows, lambdas, coeffs.exact, "given")


def _assemble(rows, lambdas, exact: bool, how: str) -> CoefficientMatrix:
    det = _det(rows, exact)
    if det is None:
        exact = False
        det = _det(rows, False)
    return CoefficientMatrix(tuple(lambdas), tuple(tuple(r) for r in rows), det, exact, how)


class RowSearchFailure(LookupError):
    pass


def coefficient_row_search(f, m: int, N1: int, probe: int = ROW_PROBE) -> CoefficientMatrix:
    """Pick lam_1..lam_N1 with a nonsingular matrix.

    First tries the upper-triangular pattern: row k uses a lam whose
    coefficients b_{lam+1..lam+k-1} vanish while b_{lam+k} does not.  If no such
    rows exist (e.g. all coefficients are nonzero) rows are added greedily
    whenever they raise the rank.  Raises :class:`RowSearchFailure` when no
    nonsingular choice exists up to ``probe``, as for polynomial f.
    """
    f = as_symbol(f)
    coeffs = _Coeffs(f, m, probe + N1)
    b = coeffs.b
    chosen = []
    for k in range(1, N1 + 1):
        lam = next(
            (
                lam
                for lam in range(probe + 1)
                if lam not in chosen
                and all(_is_zero(b[lam + i]) for i in range(1, k))
                and not _is_zero(b[lam + k])
            ),
            None,
        )
        if lam is None:
            break
        chosen.append(lam)
    if len(chosen) == N1:
        return _assemble([coeffs.row(lam, N1) for lam in chosen], chosen, coeffs.exact, "upper-triangular")

    # greedy rank growth, numeric with a relative threshold
    basis: list[list[mpc]] = []
    pivots: list[int] = []
    chosen = []
    eps = mpf(2) ** (-mp.prec // 2)
    for lam in range(probe + 1):
        row = [_to_mpc(x) for x in coeffs.row(lam, N1)]
        scale = max((abs(x) for x in row), default=mpf(0))
        if scale == 0:
            continue
        v = [x / scale for x in row]
        for brow, p in zip(basis, pivots):
            if v[p] != 0:
                t = v[p] / brow[p]
                v = [a - t * c for a, c in zip(v, brow)]
        p = max(range(N1), key=lambda i: abs(v[i]))
        if abs(v[p]) > eps:
            basis.append(v)
            pivots.append(p)
            chosen.append(lam)
            if len(chosen) == N1:
                rows = [coeffs.row(x, N1) for x in chosen]
                return _assemble(rows, chosen, coeffs.exact, "greedy")
    raise RowSearchFailure(f"no nonsingular {N1}x{N1} row set with lambda <= {probe}; rank reached {len(chosen)}")


__all__ = [
    "FallingExpansion",
    "CoefficientMatrix",
    "ResonanceError",
    "RowSearchFailure",
    "d_l",
    "d_l_from_expansion",
    "falling",
    "falling_expand",
    "lemma_ll1_C",
    "resonant_sum_rearranged",
    "lemma_ll6_matrix",
    "coefficient_row_search",
    "resonant_pair",
    "rho",
]
