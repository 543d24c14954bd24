"""Gaussian moments I_{j,k}(A, B') = (1/pi) int z^j conj(z)^k e^{Az + B' conj(z) - |z|^2} dA(z).

Three independent evaluations are provided.  :func:`moment_closed` is the one the
rest of the package uses; :func:`moment_series` and :func:`moment_quadrature` are
oracles for it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import gmpy2
from mpmath import mp, mpc, mpf

from .numerics import (
    FACTORIALS,
    PiPoly,
    PrecComplex,
    as_mpc,
    guard_bits,
)

CLOSED = "closed"
SERIES = "series"
QUADRATURE = "quad"

MOMENT_CAP = 1024
SERIES_TERM_CAP = 20000
QUAD_NODES = 40
QUAD_ANGLES = 128
QUAD_ENVELOPE = 8


class ConvergenceError(ArithmeticError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class QuadratureAccuracyWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MomentQuery:
    j: int
    k: int
    A: PrecComplex
    Bbar: PrecComplex

    def __post_init__(self):
        if not (0 <= self.j <= MOMENT_CAP and 0 <= self.k <= MOMENT_CAP):
            raise ValueError(f"moment indices must lie in [0, {MOMENT_CAP}], got ({self.j}, {self.k})")
        object.__setattr__(self, "A", PrecComplex.coerce(self.A))
        object.__setattr__(self, "Bbar", PrecComplex.coerce(self.Bbar))


@dataclass(frozen=True)
class MomentResult:
    value: PrecComplex
    path: str
    err_estimate: mpf

    @property
    def mpc(self) -> mpc:
        return self.value.value


def closed_coefficient(j: int, k: int, t: int) -> int:
    """j! k! / (t! (j-t)! (k-t)!)"""
    F = FACTORIALS
    return F[j] * F[k] // (F[t] * F[j - t] * F[k - t])


def _closed_sum_exact(j: int, k: int, A: PiPoly, Bbar: PiPoly) -> PiPoly:
    total = PiPoly()
    apow = [PiPoly.rational(1)]
    bpow = [PiPoly.rational(1)]
    for _ in range(k):
        apow.append(apow[-1] * A)
    for _ in range(j):
        bpow.append(bpow[-1] * Bbar)
    for t in range(min(j, k) + 1):
        c = closed_coefficient(j, k, t)
        total = total + PiPoly.rational(c) * apow[k - t] * bpow[j - t]
    return total


def closed_moment_sum(j: int, k: int, apow: Sequence, bpow: Sequence) -> mpc:
    total = mpc(0)
    for t in range(min(j, k) + 1):
        total += closed_coefficient(j, k, t) * apow[k - t] * bpow[j - t]
    return total


def moment_closed(q: MomentQuery) -> MomentResult:
    """e^{AB'} sum_t j!k!/(t!(j-t)!(k-t)!) A^{k-t} B'^{j-t}.

    When A and B' are exact literals and AB' is an exact multiple of 2*pi*i the
    whole sum is carried out exactly, so e.g. I_{0,0}(1, 2*pi*i) is exactly 1.
    """
    j, k, A, Bbar = q.j, q.k, q.A, q.Bbar
    prod = A * Bbar
    if prod.two_pi_i_multiple() is not None and A.is_exact() and Bbar.is_exact():
        return MomentResult(PrecComplex(exact=_closed_sum_exact(j, k, A.exact, Bbar.exact)), CLOSED, mpf(0))
    a, b = A.value, Bbar.value
    extra = 32 + int(2.9 * float(abs(a) * abs(b)))
    with guard_bits(extra):
        apow = [mpc(1)]
        bpow = [mpc(1)]
        for _ in range(k):
            apow.append(apow[-1] * a)
        for _ in range(j):
            bpow.append(bpow[-1] * b)
        val = prod.exp() * closed_moment_sum(j, k, apow, bpow)
    val = +val
    return MomentResult(PrecComplex(val), CLOSED, abs(val) * mpf(2) ** (4 - mp.prec))


def moment_table(jmax: int, kmax: int, A, Bbar, jmin: int = 0, kmin: int = 0) -> list[list[mpc]]:
    """I[j - jmin][k - kmin] for jmin <= j <= jmax, kmin <= k <= kmax.

    Built from I_{0,k} = A^k e^{AB'} and I_{j+1,k} = k I_{j,k-1} + B' I_{j,k}.
    The factor e^{AB'} is decided exactly when both parameters are exact.
    Callers wanting headroom should wrap this in :func:`guard_bits`.
    """
    A = PrecComplex.coerce(A)
    Bbar = PrecComplex.coerce(Bbar)
    factor = (A * Bbar).exp()
    a, b = A.value, Bbar.value
    F = FACTORIALS
    if A.is_zero():
        # only t = k survives: I_{j,k} = j!/(j-k)! B'^{j-k}
        pw = [mpc(1)]
        for _ in range(jmax):
            pw.append(pw[-1] * b)
        return [
            [F[j] // F[j - k] * pw[j - k] if j >= k else mpc(0) for k in range(kmin, kmax + 1)]
            for j in range(jmin, jmax + 1)
        ]
    row = [factor]
    for _ in range(kmax):
        row.append(row[-1] * a)
    rows = []
    for j in range(jmax + 1):
        if j >= jmin:
            rows.append(row[kmin:])
        if j == jmax:
            break
        row = [b * row[0]] + [k * row[k - 1] + b * row[k] for k in range(1, kmax + 1)]
    return rows


def moment_series(q: MomentQuery, rel_tol=None, max_terms: int = SERIES_TERM_CAP) -> MomentResult:
    """sum_{s >= max(j,k)} s! A^{s-j} B'^{s-k} / ((s-j)! (s-k)!), with a ratio-test tail bound."""
    j, k = q.j, q.k
    a, b = q.A.value, q.Bbar.value
    ab = a * b
    extra = 32 + int(2.9 * float(abs(ab)))
    if rel_tol is None:
        rel_tol = mpf(2) ** (-mp.prec - 8)
    with guard_bits(extra):
        s = max(j, k)
        F = FACTORIALS
        term = mpc(F[s]) / (F[s - j] * F[s - k]) * a ** (s - j) * b ** (s - k)
        total = mpc(term)
        tail = None
        for _ in range(max_terms):
            nxt = term * ab * (s + 1) / ((s + 1 - j) * (s + 1 - k))
            s += 1
            total += nxt
            term = nxt
            # ratio of the next term onward is bounded by |ab|(s+1)/((s+1-j)(s+1-k)), decreasing in s
            rho = abs(ab) * (s + 1) / ((s + 1 - j) * (s + 1 - k))
            if rho < mpf("0.5"):
                tail = abs(term) * rho / (1 - rho)
                if tail <= rel_tol * abs(total) or term == 0:
                    break
        else:
            raise ConvergenceError(f"moment series did not converge in {max_terms} terms", partial=+total)
    return MomentResult(PrecComplex(+total), SERIES, +tail)


# ---------------------------------------------------------------------------
# Polar quadrature: Gauss-Laguerre in t = r^2, trapezoid in angle.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def laguerre_rule(n: int, prec: int) -> tuple[tuple, tuple]:
    """Nodes and weights for int_0^inf f(t) e^{-t} dt, as gmpy2 mpfr at ``prec`` bits."""
    with mp.workprec(prec + 32):
        X, W = mp.gauss_quadrature(n, "laguerre")
        ctx = gmpy2.get_context()
        old = ctx.precision
        ctx.precision = prec
        try:
            nodes = tuple(gmpy2.mpfr(mp.nstr(x, int(prec * 0.302) + 10)) for x in X)
            weights = tuple(gmpy2.mpfr(mp.nstr(w, int(prec * 0.302) + 10)) for w in W)
        finally:
            ctx.precision = old
    return nodes, weights


def _to_gmpy(x, prec: int):
    x = as_mpc(x)
    digits = int(prec * 0.302) + 10
    return gmpy2.mpc(gmpy2.mpfr(mp.nstr(x.real, digits)), gmpy2.mpfr(mp.nstr(x.imag, digits)))


def _from_gmpy(x) -> mpc:
    return mpc(mp.mpf(str(x.real)), mp.mpf(str(x.imag)))


class PolarGrid:
    """Samples of exp(a z + b conj(z)) on a polar product grid, with cached angular Fourier sums."""

    def __init__(self, a, b, nodes: int, angles: int, prec: int):
        self.nodes, self.angles, self.prec = nodes, angles, prec
        ctx = gmpy2.get_context()
        old = ctx.precision
        ctx.precision = prec
        try:
            t, w = laguerre_rule(nodes, prec)
            self.r = [gmpy2.sqrt(x) for x in t]
            self.w = w
            pi2 = 2 * gmpy2.const_pi()
            self.omega = [gmpy2.exp(gmpy2.mpc(0, pi2 * kk / angles)) for kk in range(angles)]
            ga, gb = _to_gmpy(a, prec), _to_gmpy(b, prec)
            self.samples = []
            for r in self.r:
                ar, br = ga * r, gb * r
                self.samples.append([gmpy2.exp(ar * om + br * om.conjugate()) for om in self.omega])
        finally:
            ctx.precision = old
        self._fourier: dict[int, list] = {}

    def fourier(self, d: int) -> list:
        """(1/M) sum_k omega_k^d * sample[i][k] for each radial node i."""
        if d not in self._fourier:
            ctx = gmpy2.get_context()
            old = ctx.precision
            ctx.precision = self.prec
            try:
                M = self.angles
                idx = [(kk * d) % M for kk in range(M)]
                om = self.omega
                out = []
                for row in self.samples:
                    acc = gmpy2.mpc(0)
                    for kk in range(M):
                        acc += om[idx[kk]] * row[kk]
                    out.append(acc / M)
            finally:
                ctx.precision = old
            self._fourier[d] = out
        return self._fourier[d]

    def mass(self, j: int, k: int):
        """Quadrature sum of |integrand| bounds; the scale of roundoff in :meth:`moment`."""
        if not hasattr(self, "_row_max"):
            self._row_max = [max(abs(x) for x in row) for row in self.samples]
        ctx = gmpy2.get_context()
        old = ctx.precision
        ctx.precision = self.prec
        try:
            return sum((w * r ** (j + k) * m for r, w, m in zip(self.r, self.w, self._row_max)), gmpy2.mpfr(0))
        finally:
            ctx.precision = old

    def moment(self, j: int, k: int):
        ctx = gmpy2.get_context()
        old = ctx.precision
        ctx.precision = self.prec
        try:
            f = self.fourier(j - k)
            acc = gmpy2.mpc(0)
            p = j + k
            for r, w, fi in zip(self.r, self.w, f):
                acc += w * r ** p * fi
        finally:
            ctx.precision = old
        return acc


_GRID_CACHE: dict[tuple, PolarGrid] = {}


def polar_grid(a, b, nodes: int, angles: int, prec: int) -> PolarGrid:
    a, b = as_mpc(a), as_mpc(b)
    key = (a, b, nodes, angles, prec)
    grid = _GRID_CACHE.get(key)
    if grid is None:
        if len(_GRID_CACHE) > 32:
            _GRID_CACHE.clear()
        grid = _GRID_CACHE[key] = PolarGrid(a, b, nodes, angles, prec)
    return grid


def moment_quadrature(
    q: MomentQuery,
    nodes: int = QUAD_NODES,
    angles: int = QUAD_ANGLES,
    rel_tol=1e-10,
    check: bool = True,
) -> MomentResult:
    """Polar quadrature at working precision.

    The error estimate is the distance to a coarser rule with 3/4 of the radial
    nodes, which over-estimates the error of the finer rule.
    """
    a, b = q.A.value, q.Bbar.value
    if abs(a) > QUAD_ENVELOPE or abs(b) > QUAD_ENVELOPE:
        raise ValueError(f"quadrature envelope is |A|, |B'| <= {QUAD_ENVELOPE}")
    prec = mp.prec
    grid = polar_grid(a, b, nodes, angles, prec)
    val = _from_gmpy(grid.moment(q.j, q.k))
    err = mpf(0)
    if check:
        coarse = _from_gmpy(polar_grid(a, b, max(4, 3 * nodes // 4), angles, prec).moment(q.j, q.k))
        err = abs(coarse - val)
        # roundoff floor for moments that cancel to (near) zero
        floor = mp.mpf(str(grid.mass(q.j, q.k))) * mpf(2) ** (16 - prec)
        if err > rel_tol * abs(val) + floor:
            warnings.warn(
                f"quadrature I_{{{q.j},{q.k}}} moved by {mp.nstr(err, 5)} against a coarser rule",
                QuadratureAccuracyWarning,
                stacklevel=2,
            )
    return MomentResult(PrecComplex(val), QUADRATURE, err)


def moment(j: int, k: int, A, Bbar, path: str = CLOSED) -> MomentResult:
    q = MomentQuery(j, k, PrecComplex.coerce(A), PrecComplex.coerce(Bbar))
    if path == CLOSED:
        return moment_closed(q)
    if path == SERIES:
        return moment_series(q)
    if path in (QUADRATURE, "quadrature"):
        return moment_quadrature(q)
    raise ValueError(f"unknown moment path {path!r}")


# ---------------------------------------------------------------------------
# Polynomial-weighted Gaussian integral as a differential operator
# ---------------------------------------------------------------------------

def _poly_shift(p: Sequence, c) -> list:
    """Coefficients of p(x + c) from those of p(x)."""
    c = as_mpc(c)
    n = len(p)
    out = [mpc(0)] * n
    cpow = [mpc(1)]
    for _ in range(n):
        cpow.append(cpow[-1] * c)
    for i, pi in enumerate(p):
        pi = as_mpc(pi)
        for r in range(i + 1):
            out[r] += pi * FACTORIALS.binomial(i, r) * cpow[i - r]
    return out


def _apply_shifted_derivative(P: list, c) -> list:
    """(d/dz + c) P, with c independent of z."""
    out = [c * P[i] for i in range(len(P))]
    for i in range(1, len(P)):
        out[i - 1] += i * P[i]
    return out


def weighted_gaussian_rhs(p: Sequence, q: Sequence, A, B, z) -> mpc:
    """e^{(A + conj z)(conj B + z)} q*(d/dz + conj z + A) p(z + conj B).

    ``p`` and ``q`` are coefficient lists, lowest degree first; q* has the
    conjugated coefficients of q.  The operator power is built by repeated
    single applications.
    """
    A, B, z = as_mpc(A), as_mpc(B), as_mpc(z)
    Bbar = mp.conj(B)
    zbar = mp.conj(z)
    shift = zbar + A
    with guard_bits(32):
        P = _poly_shift(p, Bbar)
        acc = [mpc(0)] * len(P)
        cur = list(P)
        for n, qn in enumerate(q):
            if n:
                cur = _apply_shifted_derivative(cur, shift)
            qc = mp.conj(as_mpc(qn))
            for i in range(len(cur)):
                acc[i] += qc * cur[i]
        val = mpc(0)
        for coeff in reversed(acc):
            val = val * z + coeff
        val *= mp.exp((A + zbar) * (Bbar + z))
    return +val


def weighted_gaussian_lhs(p: Sequence, q: Sequence, A, B, z) -> mpc:
    """(1/pi) int p(w) conj(q(w)) e^{(A + conj z) w + (conj B + z) conj w - |w|^2} dA(w), by closed moments."""
    A, B, z = as_mpc(A), as_mpc(B), as_mpc(z)
    alpha = PrecComplex(A + mp.conj(z))
    beta = PrecComplex(mp.conj(B) + z)
    total = mpc(0)
    with guard_bits(32):
        for a, pa in enumerate(p):
            pa = as_mpc(pa)
            if pa == 0:
                continue
            for b, qb in enumerate(q):
                qb = as_mpc(qb)
                if qb == 0:
                    continue
                total += pa * mp.conj(qb) * moment_closed(MomentQuery(a, b, alpha, beta)).mpc
    return +total


def gaussian_weight_exponent_bound(A, Bbar) -> float:
    """log of max_z |e^{Az + B' conj z - |z|^2}| = |A + conj B'|^2 / 4."""
    s = as_mpc(A) + mp.conj(as_mpc(Bbar))
    return float(abs(s)) ** 2 / 4


__all__ = [
    "CLOSED",
    "SERIES",
    "QUADRATURE",
    "ConvergenceError",
    "MomentQuery",
    "MomentResult",
    "QuadratureAccuracyWarning",
    "moment",
    "moment_closed",
    "moment_series",
    "moment_quadrature",
    "moment_table",
    "weighted_gaussian_rhs",
    "weighted_gaussian_lhs",
]
