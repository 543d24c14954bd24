"""Truncated Toeplitz matrices and semicommutants on F^{2,m}.

Matrices are written in the orthonormal basis e_k = z^k / sqrt((k+m)!/m!),
with entry[r][c] = <T e_c, e_r>.  For a sesquilinear symbol f * conj(g) every
entry is a finite combination of Gaussian moments, so the truncation only
decides which rows and columns exist, never their values.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpc, mpf

from .moments import moment_table
from .numerics import FACTORIALS, PrecComplex, as_mpc, guard_bits, kernel
from .symbols import EXP, HoloSymbol, SesquiSymbol, as_symbol

PLATEAU = "Plateau"
GROWING = "Growing"
INCONCLUSIVE = "Inconclusive"

PLATEAU_EPS = 0.02
GROWTH_EPS = 0.05
MIN_SCAN_SPAN = 4
# norms below this are treated as an exact zero operator
ZERO_NORM = 1e-40

ASSEMBLY_GUARD_BITS = 64
MAX_TRUNCATION = 512
MAX_KER_DEGREE = 4096
POWER_ITER_TOL = 1e-12
POWER_ITER_CAP = 200000
COHERENT_TAIL_WARN = mpf("1e-20")


class NormEstimationError(ArithmeticError):
    pass


class CoherentTailWarning(RuntimeWarning):
    pass


@dataclass
class TruncatedOperator:
    m: int
    N: int
    entries: mp.matrix
    prec: int = field(default_factory=lambda: mp.prec)

    @classmethod
    def from_rows(cls, m: int, N: int, rows) -> "TruncatedOperator":
        mat = mp.matrix(N + 1, N + 1)
        for r, row in enumerate(rows):
            for c, x in enumerate(row):
                mat[r, c] = +x
        return cls(m, N, mat, mp.prec)

    def __getitem__(self, rc) -> mpc:
        return self.entries[rc]

    @property
    def size(self) -> int:
        return self.N + 1

    def rows(self) -> list[list[mpc]]:
        n = self.size
        return [[self.entries[r, c] for c in range(n)] for r in range(n)]

    def max_abs(self) -> mpf:
        n = self.size
        return max((abs(self.entries[r, c]) for r in range(n) for c in range(n)), default=mpf(0))

    def adjoint(self) -> "TruncatedOperator":
        n = self.size
        return TruncatedOperator.from_rows(
            self.m, self.N, [[mp.conj(self.entries[c, r]) for c in range(n)] for r in range(n)]
        )

    def principal(self, N: int) -> "TruncatedOperator":
        """Leading (N+1) x (N+1) block."""
        if N > self.N:
            raise ValueError(f"cannot take a {N}-block of a {self.N}-truncation")
        return TruncatedOperator.from_rows(
            self.m, N, [[self.entries[r, c] for c in range(N + 1)] for r in range(N + 1)]
        )

    def __sub__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        if (self.m, self.N) != (other.m, other.N):
            raise ValueError("operators differ in m or N")
        return TruncatedOperator(self.m, self.N, self.entries - other.entries, self.prec)

    def to_numpy(self) -> np.ndarray:
        n = self.size
        out = np.empty((n, n), dtype=complex)
        for r in range(n):
            for c in range(n):
                out[r, c] = complex(self.entries[r, c])
        return out

    def to_dict(self) -> dict:
        n = self.size
        flat = []
        for r in range(n):
            for c in range(n):
                x = self.entries[r, c]
                flat.append([x.real, x.imag])
        return {"m": self.m, "N": self.N, "entries": flat}


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _abs_freq(A: PrecComplex) -> float:
    return float(abs(A.value))


def _coef_mass(s: HoloSymbol) -> float:
    return sum(float(abs(c.value)) for c, _ in s.terms) or 1.0


def ker_expansion_degree(s: HoloSymbol, partner: HoloSymbol, m: int, N: int) -> int:
    """Degree to which the Ker atoms of ``s`` are expanded so that rows, cols <= N are exact.

    Against a polynomial partner nothing beyond N + 2m + max power can reach the
    block.  Any nonzero partner frequency couples every degree, so the series is
    extended until the coupled term bound
        (|A| R)^n (n + N + m + P)^(N + m + P) / n!
    drops below the working precision.
    """
    P = max(s.max_power(), partner.max_power())
    base = N + 2 * m + P
    ker_params = [_abs_freq(a.A) for _, a in s.terms if a.kind != EXP]
    if not ker_params:
        return base
    R = max((_abs_freq(a.A) for _, a in partner.terms if not a.A.is_zero()), default=0.0)
    Ra = max(ker_params)
    if R == 0.0 or Ra == 0.0:
        return base
    target = -(mp.prec + ASSEMBLY_GUARD_BITS) * math.log(2) - math.log(_coef_mass(s) * _coef_mass(partner))
    lr = math.log(Ra * R)
    spread = N + m + P
    n = base
    while n < MAX_KER_DEGREE:
        bound = n * lr + spread * math.log(n + spread + 1) - math.lgamma(n + 1)
        if bound < target and 2 * Ra * R < n + 1:
            return n
        n += 1
    raise OverflowError(f"kernel-atom expansion needs more than {MAX_KER_DEGREE} terms")


def _frequency_groups(s: HoloSymbol, m: int, degree: int) -> list[tuple[PrecComplex, dict[int, mpc]]]:
    """Split a symbol into sum_A p_A(z) e^{Az}; Ker atoms are expanded into the A = 0 polynomial."""
    groups: dict[tuple, tuple[PrecComplex, dict[int, mpc]]] = {}
    zero = PrecComplex(0)

    def bucket(A: PrecComplex) -> dict[int, mpc]:
        key = zero.key() if A.is_zero() else A.key()
        if key not in groups:
            groups[key] = (zero if A.is_zero() else A, {})
        return groups[key][1]

    for coef, atom in s.terms:
        if atom.kind == EXP:
            poly = bucket(atom.A)
            poly[atom.power] = poly.get(atom.power, mpc(0)) + coef.value
        else:
            poly = bucket(zero)
            step = mp.conj(atom.A.value)
            term = coef.value
            for k in range(degree - atom.power + 1):
                if k:
                    term = term * step / (k + m)
                n = atom.power + k
                poly[n] = poly.get(n, mpc(0)) + term
    return [(A, p) for A, p in groups.values() if p]


def _toeplitz_raw(f: HoloSymbol, g: HoloSymbol, m: int, N: int) -> list[list[mpc]]:
    """Entries of T_{f conj g} at the current precision, unnormalized rounding left to the caller."""
    deg_f = ker_expansion_degree(f, g, m, N)
    deg_g = ker_expansion_degree(g, f, m, N)
    F = FACTORIALS
    F.warm(2 * (N + m + max(deg_f, deg_g)) + 2)
    out = [[mpc(0)] * (N + 1) for _ in range(N + 1)]
    for Af, pf in _frequency_groups(f, m, deg_f):
        amin, amax = min(pf), max(pf)
        pf_items = sorted(pf.items())
        for Ag, pg in _frequency_groups(g, m, deg_g):
            bmin, bmax = min(pg), max(pg)
            pg_items = [(b, mp.conj(q)) for b, q in sorted(pg.items())]
            jmin, jmax = m + amin, N + m + amax
            kmin, kmax = m + bmin, N + m + bmax
            if Af.is_zero() and Ag.is_zero():
                # I_{j,k}(0,0) = j! delta_{jk}
                for c in range(N + 1):
                    for r in range(N + 1):
                        acc = mpc(0)
                        for b, qc in pg_items:
                            a = r + b - c
                            if a in pf:
                                acc += pf[a] * qc * F[r + m + b]
                        out[r][c] += acc
                continue
            table = moment_table(jmax, kmax, Af, Ag.conjugate(), jmin, kmin)
            width = kmax - kmin + 1
            for c in range(N + 1):
                X = [mpc(0)] * width
                for a, p in pf_items:
                    row = table[c + m + a - jmin]
                    for kk in range(width):
                        X[kk] += p * row[kk]
                for r in range(N + 1):
                    acc = mpc(0)
                    for b, qc in pg_items:
                        acc += qc * X[r + m + b - kmin]
                    out[r][c] += acc
    norms = [mp.sqrt(F.quotient(k, m)) for k in range(N + 1)]
    mf = F[m]
    for r in range(N + 1):
        for c in range(N + 1):
            out[r][c] /= mf * norms[r] * norms[c]
    return out


def _check_truncation(m: int, N: int) -> None:
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not 0 <= N <= MAX_TRUNCATION:
        raise ValueError(f"truncation N must lie in [0, {MAX_TRUNCATION}]")


def toeplitz_matrix(s: SesquiSymbol, m: int, N: int) -> TruncatedOperator:
    _check_truncation(m, N)
    with guard_bits(ASSEMBLY_GUARD_BITS):
        rows = _toeplitz_raw(s.f, s.g, m, N)
    return TruncatedOperator.from_rows(m, N, rows)


_ONE = HoloSymbol.constant(1)


def _semicommutant_raw(f: HoloSymbol, g: HoloSymbol, m: int, N: int) -> list[list[mpc]]:
    Tfg = _toeplitz_raw(f, g, m, N)
    Tf = _toeplitz_raw(f, _ONE, m, N)
    Tg = _toeplitz_raw(_ONE, g, m, N)
    # T_f is lower and T_conj(g) upper triangular, so the sum over the
    # intermediate index stops at min(r, c) and the truncated product is exact.
    for r in range(N + 1):
        Tf_r = Tf[r]
        for c in range(N + 1):
            acc = mpc(0)
            for j in range(min(r, c) + 1):
                acc += Tf_r[j] * Tg[j][c]
            Tfg[r][c] -= acc
    return Tfg


def semicommutant(f, g, m: int, N: int) -> TruncatedOperator:
    """Matrix of T_{f conj g} - T_f T_{conj g}."""
    f, g = as_symbol(f), as_symbol(g)
    _check_truncation(m, N)
    with guard_bits(ASSEMBLY_GUARD_BITS):
        rows = _semicommutant_raw(f, g, m, N)
    return TruncatedOperator.from_rows(m, N, rows)


# ---------------------------------------------------------------------------
# Spectral quantities
# ---------------------------------------------------------------------------

def _power_norm(M: np.ndarray, tol: float, cap: int) -> float:
    n = M.shape[0]
    v = np.ones(n, dtype=complex) / math.sqrt(n)
    prev = 0.0
    for _ in range(cap):
        w = M @ v
        lam = float(np.vdot(w, w).real)
        u = M.conj().T @ w
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        if abs(lam - prev) <= tol * lam:
            return math.sqrt(lam)
        prev = lam
    raise NormEstimationError(f"power iteration did not settle within {cap} steps")


def operator_norm(T: TruncatedOperator, tol: float = POWER_ITER_TOL, cap: int = POWER_ITER_CAP) -> float:
    """Largest singular value by power iteration on T*T from the normalized all-ones vector."""
    scale = T.max_abs()
    if scale == 0:
        return 0.0
    n = T.size
    M = np.empty((n, n), dtype=complex)
    for r in range(n):
        for c in range(n):
            M[r, c] = complex(T.entries[r, c] / scale)
    return _power_norm(M, tol, cap) * float(scale)


def is_hermitian(T: TruncatedOperator, rel_tol=mpf("1e-30")) -> bool:
    n = T.size
    scale = T.max_abs()
    return all(
        abs(T.entries[r, c] - mp.conj(T.entries[c, r])) <= rel_tol * scale for r in range(n) for c in range(r, n)
    )


def hermitian_eigenvalues(T: TruncatedOperator) -> list[mpf]:
    """Eigenvalues of the Hermitian part (T + T*)/2, ascending, at working precision."""
    n = T.size
    H = mp.matrix(n, n)
    for r in range(n):
        for c in range(n):
            H[r, c] = (T.entries[r, c] + mp.conj(T.entries[c, r])) / 2
    ev = mp.eighe(H, eigvals_only=True) if hasattr(mp, "eighe") else mp.eigh(H, eigvals_only=True)
    return sorted(mp.re(x) for x in ev)


def hermitian_min_eigenvalue(T: TruncatedOperator) -> mpf:
    return hermitian_eigenvalues(T)[0]


# ---------------------------------------------------------------------------
# Norm scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormScan:
    entries: tuple[tuple[int, float], ...]
    classification: str
    ratios: tuple[float, ...] = ()
    note: str = ""

    @property
    def Ns(self) -> list[int]:
        return [n for n, _ in self.entries]

    @property
    def norms(self) -> list[float]:
        return [x for _, x in self.entries]


def classify_norms(
    Ns, norms, plateau_eps: float = PLATEAU_EPS, growth_eps: float = GROWTH_EPS
) -> tuple[str, tuple[float, ...], str]:
    if any(x is None for x in norms):
        return INCONCLUSIVE, (), "norm estimation failed"
    if max(norms) < ZERO_NORM:
        return PLATEAU, tuple(1.0 for _ in norms[1:]), "zero operator"
    if min(norms) <= 0.0:
        return INCONCLUSIVE, (), "vanishing norm at a small truncation"
    ratios = tuple(b / a for a, b in zip(norms, norms[1:]))
    if Ns[-1] < MIN_SCAN_SPAN * Ns[0]:
        return INCONCLUSIVE, ratios, f"truncations span less than a factor of {MIN_SCAN_SPAN}"
    if ratios[-1] < 1 + plateau_eps:
        return PLATEAU, ratios, ""
    if all(x > 1 + growth_eps for x in ratios):
        return GROWING, ratios, ""
    return INCONCLUSIVE, ratios, ""


def norm_scan(
    f,
    g,
    m: int,
    Ns,
    plateau_eps: float = PLATEAU_EPS,
    growth_eps: float = GROWTH_EPS,
    threads: int = 1,
) -> NormScan:
    """Norms of the truncated semicommutants for each N in ``Ns``, with a growth verdict.

    Entries do not depend on the truncation, so the largest matrix is built once
    and the smaller ones are its leading blocks.
    """
    Ns = [int(n) for n in Ns]
    if len(Ns) < 2 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must contain at least two strictly increasing truncations")
    S = semicommutant(f, g, m, Ns[-1])

    def one(n: int):
        try:
            return operator_norm(S.principal(n))
        except NormEstimationError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            norms = list(pool.map(one, Ns))
    else:
        norms = [one(n) for n in Ns]
    label, ratios, note = classify_norms(Ns, norms, plateau_eps, growth_eps)
    return NormScan(tuple(zip(Ns, norms)), label, ratios, note)


# ---------------------------------------------------------------------------
# Coherent states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentVector:
    coeffs: tuple
    norm_sq: mpf
    tail_mass: mpf

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k: int) -> mpc:
        return self.coeffs[k]


def coherent_vector(z, m: int, N: int, warn: bool = True) -> CoherentVector:
    """Unit vector along K_m(., z) truncated to degree N.

    ``norm_sq`` is the squared norm before normalization, which tends to
    K_m(z, z); ``tail_mass`` is 1 - norm_sq / K_m(z, z).
    """
    z = as_mpc(z)
    zb = mp.conj(z)
    with guard_bits(32):
        raw = []
        scale = mpf(1)  # m!/(k+m)!
        power = mpc(1)
        for k in range(N + 1):
            if k:
                scale /= k + m
                power *= zb
            raw.append(mp.sqrt(scale) * power)
        norm_sq = mp.fsum(abs(x) ** 2 for x in raw)
        full = kernel(z, z, m).real
        tail = 1 - norm_sq / full
        norm = mp.sqrt(norm_sq)
        coeffs = tuple(+(x / norm) for x in raw)
    tail = +tail
    if warn and tail > COHERENT_TAIL_WARN:
        warnings.warn(
            f"coherent vector at |z| = {mp.nstr(abs(z), 5)} keeps tail mass {mp.nstr(tail, 3)} beyond N = {N}",
            CoherentTailWarning,
            stacklevel=2,
        )
    return CoherentVector(coeffs, +norm_sq, max(tail, mpf(0)))


def coherent_truncation(z, m: int, tail: mpf = COHERENT_TAIL_WARN, cap: int = MAX_TRUNCATION) -> int:
    """Smallest N whose coherent vector at z has tail mass below ``tail``."""
    z = as_mpc(z)
    r2 = abs(z) ** 2
    full = kernel(z, z, m).real
    with guard_bits(32):
        acc = mpf(0)
        term = mpf(1)
        for k in range(cap + 1):
            if k:
                term = term * r2 / (k + m)
            acc += term
            if 1 - acc / full < tail:
                return k
    raise ValueError(f"coherent vector at |z| = {mp.nstr(abs(z), 5)} needs more than {cap} terms")


def quadratic_form(T: TruncatedOperator, v) -> mpc:
    """<T v, v>."""
    n = T.size
    coeffs = list(v)[:n]
    acc = mpc(0)
    for r in range(n):
        row = mpc(0)
        for c in range(n):
            row += T.entries[r, c] * coeffs[c]
        acc += row * mp.conj(coeffs[r])
    return acc


__all__ = [
    "PLATEAU",
    "GROWING",
    "INCONCLUSIVE",
    "CoherentVector",
    "NormEstimationError",
    "NormScan",
    "TruncatedOperator",
    "classify_norms",
    "coherent_truncation",
    "coherent_vector",
    "hermitian_eigenvalues",
    "hermitian_min_eigenvalue",
    "is_hermitian",
    "ker_expansion_degree",
    "norm_scan",
    "operator_norm",
    "quadratic_form",
    "semicommutant",
    "toeplitz_matrix",
]
