"""Berezin transforms on F^{2,m}.

Routes:
  closed     sums of pure exponentials, z != 0
  series     any symbol; the kernel is expanded in its power series
  quad       polar quadrature oracle with the kernel evaluated pointwise
  matrix     <S_N v_z, v_z> for the semicommutant, through coherent vectors
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import gmpy2
from mpmath import mp, mpc, mpf

from .moments import ConvergenceError, QuadratureAccuracyWarning, closed_moment_sum, laguerre_rule, moment_table
from .numerics import (
    FACTORIALS,
    PrecComplex,
    as_mpc,
    exp_product,
    guard_bits,
    kernel,
    q_m,
)
from .operators import (
    _frequency_groups,
    coherent_truncation,
    coherent_vector,
    quadratic_form,
    semicommutant,
)
from .symbols import EXP, HoloSymbol, SesquiSymbol, as_symbol

CLOSED = "closed"
SERIES = "series"
QUADRATURE = "quad"
MATRIX = "matrix"
AUTO = "auto"
ROUTES = (AUTO, CLOSED, SERIES, QUADRATURE)

SERIES_START = 16
SERIES_CAP = 1024
QUAD_NODES = 48
QUAD_ANGLES = 192
QUAD_ENVELOPE = 8
DEFECT_FLOOR = mpf("-1e-20")
MATRIX_TAIL = mpf("1e-40")


class DegenerateZError(ValueError):
    """The closed assembly divides by |z|^{2m}; z = 0 must use the series route."""


class NegativeDefectFactor(ArithmeticError):
    pass


@dataclass(frozen=True)
class BerezinSample:
    z: PrecComplex
    value: PrecComplex
    route: str


def _as_sesqui(s) -> SesquiSymbol:
    if isinstance(s, SesquiSymbol):
        return s
    f, g = s
    return SesquiSymbol(as_symbol(f), as_symbol(g))


def _exp_guard(z, *freqs) -> int:
    r = float(abs(as_mpc(z))) + max((float(abs(as_mpc(a))) for a in freqs), default=0.0)
    return 40 + int(2.9 * r * r)


# ---------------------------------------------------------------------------
# Closed form for e^{Aw} * conj(e^{Bw})
# ---------------------------------------------------------------------------

def berezin_exp_closed(A, Bbar, m: int, z) -> PrecComplex:
    """Berezin transform of e^{Aw + B' conj(w)} at z != 0.

    [e^{(A+z')(B'+z)} - e^{B'(A+z')} q_m(zA+|z|^2) - e^{A(B'+z)} q_m(z'B'+|z|^2) + p] / (e^{|z|^2} - q_m(|z|^2))
    with z' = conj(z) and p = sum_{k,l<m} z'^k z^l / (k! l!) I_{k,l}(A, B').
    Every term carries e^{AB'}, which is factored out and decided exactly when possible.
    """
    A = PrecComplex.coerce(A)
    Bbar = PrecComplex.coerce(Bbar)
    z = as_mpc(z)
    if z == 0:
        raise DegenerateZError("closed Berezin assembly is singular at z = 0; use the series route")
    r2 = abs(z) ** 2
    small = max(0.0, -math.log2(float(r2))) if r2 < 1 else 0.0
    extra = _exp_guard(z, A.value, Bbar.value) + int(m * small) + 8 * m
    E = exp_product(A, Bbar)
    with guard_bits(extra):
        a, b = A.value, Bbar.value
        zb = mp.conj(z)
        num = mp.exp(a * z + b * zb + r2)
        num -= mp.exp(b * zb) * q_m(z * a + r2, m)
        num -= mp.exp(a * z) * q_m(zb * b + r2, m)
        if m:
            # p without its factor e^{AB'}
            apow = [a ** i for i in range(m)]
            bpow = [b ** i for i in range(m)]
            F = FACTORIALS
            for k in range(m):
                for l in range(m):
                    num += zb ** k * z ** l / (F[k] * F[l]) * closed_moment_sum(k, l, apow, bpow)
        den = mp.exp(r2) - q_m(r2, m)
        val = E * num / den
    return PrecComplex(+val)


# ---------------------------------------------------------------------------
# Kernel-series route
# ---------------------------------------------------------------------------

def _convolve(weights: list, poly: list[tuple[int, mpc]], offset: int, lo: int, hi: int) -> list:
    """u[j - lo] = sum over k + offset + a = j of weights[k] * p_a."""
    u = [mpc(0)] * (hi - lo + 1)
    for a, p in poly:
        base = offset + a - lo
        for k, w in enumerate(weights):
            u[base + k] += w * p
    return u


def _series_numerator(f: HoloSymbol, g: HoloSymbol, m: int, z: mpc, K: int) -> mpc:
    """sum_{k,l<=K} c_k c_l conj(z)^k z^l M_{k,l}, c_k = m!/(k+m)!, M_{k,l} = <phi w^{k+m} conj(w)^{l+m}>.

    M_{k,l} = sum_{a,b} p_a conj(q_b) I_{k+m+a, l+m+b}, so the double sum is the
    bilinear form u^T I v with u, v convolutions of the weights with p, conj(q).
    """
    F = FACTORIALS
    deg = K + 2 * m + max(f.max_power(), g.max_power())
    F.warm(2 * (K + m + deg) + 2)
    zb = mp.conj(z)
    ck = [mpf(F[m]) / F[k + m] for k in range(K + 1)]
    left = [ck[k] * zb ** k for k in range(K + 1)]
    right = [ck[l] * z ** l for l in range(K + 1)]
    total = mpc(0)
    for Af, pf in _frequency_groups(f, m, deg):
        pf_items = sorted(pf.items())
        jmin, jmax = m + pf_items[0][0], K + m + pf_items[-1][0]
        u = _convolve(left, pf_items, m, jmin, jmax)
        for Ag, pg in _frequency_groups(g, m, deg):
            pg_items = [(b, mp.conj(q)) for b, q in sorted(pg.items())]
            kmin, kmax = m + pg_items[0][0], K + m + pg_items[-1][0]
            v = _convolve(right, pg_items, m, kmin, kmax)
            if Af.is_zero() and Ag.is_zero():
                # I_{j,k}(0,0) = j! delta_{jk}
                for j in range(max(jmin, kmin), min(jmax, kmax) + 1):
                    total += u[j - jmin] * F[j] * v[j - kmin]
                continue
            table = moment_table(jmax, kmax, Af, Ag.conjugate(), jmin, kmin)
            for uj, row in zip(u, table):
                if uj == 0:
                    continue
                acc = mpc(0)
                for t, vk in zip(row, v):
                    acc += t * vk
                total += uj * acc
    return total


def berezin_series(s, m: int, z, K: int | None = None, rel_tol=None, cap: int = SERIES_CAP) -> PrecComplex:
    """Berezin transform by expanding both kernel factors in their series.

    With ``K`` given the double sum is cut at K.  Otherwise K doubles until two
    successive values agree to ``rel_tol``.
    """
    s = _as_sesqui(s)
    z = as_mpc(z)
    if K is not None and K < 0:
        raise ValueError("K must be nonnegative")
    if rel_tol is None:
        rel_tol = mpf(2) ** (-mp.prec + 8)
    freqs = [a.A.value for _, a in s.f.terms + s.g.terms]
    extra = _exp_guard(z, *freqs)
    with guard_bits(extra):
        full = kernel(z, z, m)
        denom = FACTORIALS[m] * full
        if z == 0:
            K = 0
        if K is not None:
            val = _series_numerator(s.f, s.g, m, z, K) / denom
        else:
            K = SERIES_START
            prev = _series_numerator(s.f, s.g, m, z, K) / denom
            while True:
                if 2 * K > cap:
                    raise ConvergenceError(f"Berezin series did not settle by K = {cap}", partial=+prev)
                K *= 2
                val = _series_numerator(s.f, s.g, m, z, K) / denom
                if abs(val - prev) <= rel_tol * abs(val) or val == prev:
                    break
                prev = val
    return PrecComplex(+val)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

def _gm(x):
    x = as_mpc(x)
    d = int(mp.prec * 0.302) + 10
    return gmpy2.mpc(gmpy2.mpfr(mp.nstr(x.real, d)), gmpy2.mpfr(mp.nstr(x.imag, d)))


def _gm_kernel(x, m: int, mfact: int, qcoef: list):
    """K_m at product x = w conj(a), gmpy2 arithmetic."""
    if abs(x) < 1:
        total = gmpy2.mpc(0)
        term = gmpy2.mpc(1)
        k = 0
        eps = gmpy2.mpfr(2) ** (-gmpy2.get_context().precision - 4)
        while True:
            total += term
            k += 1
            term = term * x / (k + m)
            if abs(term) < eps:
                return total
    q = gmpy2.mpc(0)
    for c in reversed(qcoef):
        q = q * x + c
    return mfact * (gmpy2.exp(x) - q) / x ** m


class _GmpySymbol:
    def __init__(self, s: HoloSymbol, m: int):
        self.m = m
        self.mfact = FACTORIALS[m]
        self.qcoef = [gmpy2.mpfr(1) / FACTORIALS[k] for k in range(m)]
        self.atoms = [(_gm(c.value), a.power, a.kind, _gm(a.A.value), _gm(mp.conj(a.A.value))) for c, a in s.terms]

    def __call__(self, w):
        total = gmpy2.mpc(0)
        for c, p, kind, A, Abar in self.atoms:
            base = c * w ** p if p else c
            if kind == EXP:
                total += base * gmpy2.exp(A * w) if A != 0 else base
            else:
                total += base * _gm_kernel(w * Abar, self.m, self.mfact, self.qcoef)
        return total


def _quad_value(s: SesquiSymbol, m: int, z: mpc, nodes: int, angles: int, prec: int) -> mpc:
    ctx = gmpy2.get_context()
    old = ctx.precision
    ctx.precision = prec
    try:
        t, wts = laguerre_rule(nodes, prec)
        f = _GmpySymbol(s.f, m)
        g = _GmpySymbol(s.g, m)
        zb = _gm(mp.conj(z))
        pi2 = 2 * gmpy2.const_pi()
        omega = [gmpy2.exp(gmpy2.mpc(0, pi2 * k / angles)) for k in range(angles)]
        total = gmpy2.mpc(0)
        for ti, wi in zip(t, wts):
            r = gmpy2.sqrt(ti)
            ring = gmpy2.mpc(0)
            for om in omega:
                w = r * om
                kv = _gm_kernel(w * zb, m, f.mfact, f.qcoef)
                ring += f(w) * g(w).conjugate() * gmpy2.norm(kv)
            total += wi * ti ** m * ring / angles
        out = mpc(mp.mpf(str(total.real)), mp.mpf(str(total.imag)))
    finally:
        ctx.precision = old
    return out


def berezin_quadrature(
    s, m: int, z, nodes: int = QUAD_NODES, angles: int = QUAD_ANGLES, rel_tol=1e-9, check: bool = True
) -> PrecComplex:
    """phi(w)|K_m(z,w)|^2 |w|^{2m} e^{-|w|^2} / (pi m! K_m(z,z)) integrated on a polar grid."""
    s = _as_sesqui(s)
    z = as_mpc(z)
    freqs = [float(abs(a.A.value)) for _, a in s.f.terms + s.g.terms]
    if float(abs(z)) > QUAD_ENVELOPE or any(x > QUAD_ENVELOPE for x in freqs):
        raise ValueError(f"quadrature envelope is |z|, |A| <= {QUAD_ENVELOPE}")
    prec = mp.prec
    denom = FACTORIALS[m] * kernel(z, z, m)
    val = _quad_value(s, m, z, nodes, angles, prec) / denom
    if check:
        coarse = _quad_value(s, m, z, max(4, 3 * nodes // 4), angles, prec) / denom
        if abs(coarse - val) > rel_tol * abs(val):
            warnings.warn(
                f"Berezin quadrature at z = {mp.nstr(z, 5)} moved by {mp.nstr(abs(coarse - val), 3)} against a coarser rule",
                QuadratureAccuracyWarning,
                stacklevel=2,
            )
    return PrecComplex(val)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def _closed_eligible(s: SesquiSymbol) -> bool:
    return s.f.is_pure_exponential() and s.g.is_pure_exponential()


def _closed_sum(s: SesquiSymbol, m: int, z) -> PrecComplex:
    total = mpc(0)
    for cf, af in s.f.terms:
        for cg, ag in s.g.terms:
            val = berezin_exp_closed(af.A, ag.A.conjugate(), m, z).value
            total += cf.value * mp.conj(cg.value) * val
    return PrecComplex(total)


def berezin(s, m: int, z, route: str = AUTO) -> BerezinSample:
    s = _as_sesqui(s)
    zc = PrecComplex.coerce(z) if not isinstance(z, mpc) else PrecComplex(z)
    zv = zc.value
    if route == AUTO:
        route = CLOSED if zv != 0 and _closed_eligible(s) else SERIES
    if route == CLOSED:
        if not _closed_eligible(s):
            raise ValueError("closed route covers sums of pure exponentials only")
        val = _closed_sum(s, m, zv)
    elif route == SERIES:
        val = berezin_series(s, m, zv)
    elif route in (QUADRATURE, "quadrature"):
        route = QUADRATURE
        val = berezin_quadrature(s, m, zv)
    else:
        raise ValueError(f"unknown Berezin route {route!r}")
    return BerezinSample(zc, val, route)


def semicommutant_berezin(f, g, m: int, z, route: str = AUTO) -> PrecComplex:
    """Berezin(f conj g)(z) - f(z) conj(g(z)), the Berezin transform of T_{f conj g} - T_f T_{conj g}."""
    f, g = as_symbol(f), as_symbol(g)
    zv = as_mpc(z)
    b = berezin(SesquiSymbol(f, g), m, zv, route).value.value
    with guard_bits(_exp_guard(zv, *[a.A.value for _, a in f.terms + g.terms])):
        val = b - f.evaluate(zv, m) * mp.conj(g.evaluate(zv, m))
    return PrecComplex(+val)


def semicommutant_berezin_matrix(f, g, m: int, z, N: int | None = None) -> PrecComplex:
    """<S_N v_z, v_z> with v_z the truncated normalized kernel at z."""
    f, g = as_symbol(f), as_symbol(g)
    zv = as_mpc(z)
    if N is None:
        N = coherent_truncation(zv, m, MATRIX_TAIL)
    S = semicommutant(f, g, m, N)
    v = coherent_vector(zv, m, N)
    return PrecComplex(quadratic_form(S, v.coeffs))


# ---------------------------------------------------------------------------
# Defect
# ---------------------------------------------------------------------------

def hankel_factor(f, m: int, z, route: str = AUTO) -> mpf:
    """Berezin(|f|^2)(z) - |Berezin(f)(z)|^2 = ||H_{conj f} k_z||^2, clamped at roundoff."""
    f = as_symbol(f)
    one = HoloSymbol.constant(1)
    zv = as_mpc(z)
    with guard_bits(_exp_guard(zv, *[a.A.value for _, a in f.terms])):
        sq = berezin(SesquiSymbol(f, f), m, zv, route).value.value
        lin = berezin(SesquiSymbol(f, one), m, zv, route).value.value
        val = sq.real - abs(lin) ** 2
    val = +val
    if val < 0:
        if val < DEFECT_FLOOR:
            raise NegativeDefectFactor(f"Hankel factor {mp.nstr(val, 5)} at z = {mp.nstr(zv, 5)} is negative")
        val = mpf(0)
    return val


def defect(f, g, m: int, z, route: str = AUTO) -> mpf:
    """D(f,g)(z) = [B|f|^2 - |Bf|^2][B|g|^2 - |Bg|^2]."""
    return hankel_factor(f, m, z, route) * hankel_factor(g, m, z, route)


__all__ = [
    "AUTO",
    "CLOSED",
    "SERIES",
    "QUADRATURE",
    "MATRIX",
    "BerezinSample",
    "DegenerateZError",
    "NegativeDefectFactor",
    "berezin",
    "berezin_exp_closed",
    "berezin_quadrature",
    "berezin_series",
    "defect",
    "hankel_factor",
    "semicommutant_berezin",
    "semicommutant_berezin_matrix",
]
