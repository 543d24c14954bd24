"""Precision-configurable complex scalars and the elementary functions q_m and K_m.

Complex parameters that come from literals (``(0,2pi)``, ``1.5`` ...) keep an exact
representation as a polynomial in pi with Gaussian-rational coefficients.  That is
what lets ``exp(A * conj(B))`` be recognised as exactly 1 when the product is an
integer multiple of 2*pi*i, before anything is rounded.
"""

from __future__ import annotations

import math
import os
import threading
from contextlib import contextmanager
from fractions import Fraction
from typing import Iterator

from mpmath import mp, mpc, mpf
from mpmath.libmp import from_rational, round_nearest

DEFAULT_PRECISION_BITS = 256
PRECISION_ENV = "FS_PRECISION_BITS"
MIN_PRECISION_BITS = 64

# Series truncation: stop after this many consecutive terms below rel_tol * |sum|.
SMALL_TERM_RUN = 3


def configure_precision(bits: int | None = None) -> int:
    """Set the working precision (mantissa bits) from ``bits``, then the environment, then the default."""
    if bits is None:
        env = os.environ.get(PRECISION_ENV)
        bits = int(env) if env else DEFAULT_PRECISION_BITS
    bits = int(bits)
    if bits < MIN_PRECISION_BITS:
        raise ValueError(f"precision must be at least {MIN_PRECISION_BITS} bits, got {bits}")
    mp.prec = bits
    return bits


def get_precision() -> int:
    return mp.prec


@contextmanager
def precision(bits: int) -> Iterator[int]:
    with mp.workprec(bits):
        yield bits


@contextmanager
def guard_bits(extra: int) -> Iterator[int]:
    """Temporarily raise the working precision by ``extra`` bits."""
    with mp.workprec(mp.prec + max(0, int(extra))):
        yield mp.prec


def frac_to_mpf(q: Fraction) -> mpf:
    """Correctly rounded conversion of an exact rational."""
    return mpf(from_rational(q.numerator, q.denominator, mp.prec, round_nearest))


# ---------------------------------------------------------------------------
# Exact values: polynomials in pi with Gaussian-rational coefficients
# ---------------------------------------------------------------------------

class PiPoly:
    """Exact complex number ``sum_k (a_k + i b_k) * pi**k`` with rational a_k, b_k.

    Since pi is transcendental the representation is unique, so equality and
    the test "is an integer multiple of 2*pi*i" are decided exactly.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[int, tuple[Fraction, Fraction]] | None = None):
        clean = {}
        for k, (a, b) in (terms or {}).items():
            a, b = Fraction(a), Fraction(b)
            if a or b:
                clean[k] = (a, b)
        self.terms = clean

    @classmethod
    def rational(cls, re, im=0, pi_power: int = 0) -> "PiPoly":
        return cls({pi_power: (Fraction(re), Fraction(im))})

    def __add__(self, other: "PiPoly") -> "PiPoly":
        out = dict(self.terms)
        for k, (a, b) in other.terms.items():
            a0, b0 = out.get(k, (Fraction(0), Fraction(0)))
            out[k] = (a0 + a, b0 + b)
        return PiPoly(out)

    def __neg__(self) -> "PiPoly":
        return PiPoly({k: (-a, -b) for k, (a, b) in self.terms.items()})

    def __sub__(self, other: "PiPoly") -> "PiPoly":
        return self + (-other)

    def __mul__(self, other: "PiPoly") -> "PiPoly":
        out: dict[int, tuple[Fraction, Fraction]] = {}
        for k1, (a1, b1) in self.terms.items():
            for k2, (a2, b2) in other.terms.items():
                a0, b0 = out.get(k1 + k2, (Fraction(0), Fraction(0)))
                out[k1 + k2] = (a0 + a1 * a2 - b1 * b2, b0 + a1 * b2 + b1 * a2)
        return PiPoly(out)

    def conjugate(self) -> "PiPoly":
        return PiPoly({k: (a, -b) for k, (a, b) in self.terms.items()})

    def inverse(self) -> "PiPoly | None":
        """Exact reciprocal of a single monomial c*pi**k with k == 0, else None."""
        if len(self.terms) != 1:
            return None
        (k, (a, b)), = self.terms.items()
        if k != 0:
            return None
        n = a * a + b * b
        return PiPoly({0: (a / n, -b / n)})

    def is_zero(self) -> bool:
        return not self.terms

    def two_pi_i_multiple(self) -> int | None:
        """n if the value is exactly 2*pi*i*n (n may be 0), else None."""
        if not self.terms:
            return 0
        if set(self.terms) != {1}:
            return None
        a, b = self.terms[1]
        if a != 0:
            return None
        half = b / 2
        if half.denominator != 1:
            return None
        return int(half)

    def to_mpc(self) -> mpc:
        total = mpc(0)
        for k, (a, b) in self.terms.items():
            total += mpc(frac_to_mpf(a), frac_to_mpf(b)) * mp.pi ** k
        return total

    def key(self) -> tuple:
        return tuple(sorted(self.terms.items()))

    def __eq__(self, other) -> bool:
        return isinstance(other, PiPoly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"PiPoly({self.terms!r})"


class PrecComplex:
    """Complex scalar at the configured precision, optionally carrying an exact form.

    Arithmetic between two exact values stays exact; anything else falls back to
    mpmath at the working precision.  ``value`` is re-rounded whenever the
    precision changes, so an exact literal never goes stale.
    """

    __slots__ = ("_exact", "_value", "_value_prec")

    def __init__(self, value=None, exact: PiPoly | None = None):
        if value is None and exact is None:
            raise ValueError("PrecComplex needs a value or an exact form")
        if exact is None and isinstance(value, (int, Fraction)):
            exact = PiPoly.rational(value)
            value = None
        self._exact = exact
        self._value = None if value is None else mpc(value)
        self._value_prec = mp.prec if value is not None else None

    @classmethod
    def exact_parts(cls, re, im=0) -> "PrecComplex":
        return cls(exact=PiPoly.rational(re, im))

    @classmethod
    def coerce(cls, x) -> "PrecComplex":
        if isinstance(x, PrecComplex):
            return x
        if isinstance(x, PiPoly):
            return cls(exact=x)
        if isinstance(x, str):
            return parse_cnum(x)
        if isinstance(x, complex):
            return cls(exact=PiPoly.rational(Fraction(x.real), Fraction(x.imag)))
        if isinstance(x, float):
            return cls(exact=PiPoly.rational(Fraction(x)))
        return cls(x)

    @property
    def exact(self) -> PiPoly | None:
        return self._exact

    @property
    def value(self) -> mpc:
        if self._exact is not None and self._value_prec != mp.prec:
            self._value = self._exact.to_mpc()
            self._value_prec = mp.prec
        return self._value

    @property
    def re(self) -> mpf:
        return self.value.real

    @property
    def im(self) -> mpf:
        return self.value.imag

    @property
    def pi_factor(self) -> tuple[Fraction, Fraction] | None:
        """(a, b) when the value is exactly (a + ib)*pi."""
        if self._exact is None or set(self._exact.terms) - {1}:
            return None
        return self._exact.terms.get(1, (Fraction(0), Fraction(0)))

    def is_exact(self) -> bool:
        return self._exact is not None

    def is_zero(self) -> bool:
        if self._exact is not None:
            return self._exact.is_zero()
        return self.value == 0

    def _binary(self, other, exact_op, float_op) -> "PrecComplex":
        other = PrecComplex.coerce(other)
        if self._exact is not None and other._exact is not None:
            return PrecComplex(exact=exact_op(self._exact, other._exact))
        return PrecComplex(float_op(self.value, other.value))

    def __add__(self, other):
        return self._binary(other, PiPoly.__add__, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, PiPoly.__sub__, lambda a, b: a - b)

    def __rsub__(self, other):
        return PrecComplex.coerce(other) - self

    def __mul__(self, other):
        return self._binary(other, PiPoly.__mul__, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = PrecComplex.coerce(other)
        if self._exact is not None and other._exact is not None:
            inv = other._exact.inverse()
            if inv is not None:
                return PrecComplex(exact=self._exact * inv)
        return PrecComplex(self.value / other.value)

    def __neg__(self):
        if self._exact is not None:
            return PrecComplex(exact=-self._exact)
        return PrecComplex(-self.value)

    def conjugate(self) -> "PrecComplex":
        if self._exact is not None:
            return PrecComplex(exact=self._exact.conjugate())
        return PrecComplex(mp.conj(self.value))

    def two_pi_i_multiple(self) -> int | None:
        return None if self._exact is None else self._exact.two_pi_i_multiple()

    def exp(self) -> mpc:
        """exp of the value; exactly 1 when the value is symbolically in 2*pi*i*Z."""
        if self.two_pi_i_multiple() is not None:
            return mpc(1)
        return mp.exp(self.value)

    def sort_key(self) -> tuple:
        v = self.value
        return (float(v.real), float(v.imag), self.key())

    def key(self) -> tuple:
        if self._exact is not None:
            return ("x", self._exact.key())
        v = self.value
        return ("f", v.real, v.imag)

    def __eq__(self, other) -> bool:
        try:
            other = PrecComplex.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        if self._exact is not None and other._exact is not None:
            return self._exact == other._exact
        return self.value == other.value

    def __hash__(self) -> int:
        if self._exact is not None:
            return hash(self._exact)
        return hash(complex(self.value))

    def __complex__(self) -> complex:
        return complex(self.value)

    def __repr__(self) -> str:
        return f"PrecComplex({format_cnum(self)})"


def exp_product(a: PrecComplex, b: PrecComplex) -> mpc:
    """exp(a*b), deciding resonance (a*b in 2*pi*i*Z) symbolically when both are exact."""
    return (PrecComplex.coerce(a) * PrecComplex.coerce(b)).exp()


def as_mpc(x) -> mpc:
    if isinstance(x, PrecComplex):
        return x.value
    if isinstance(x, (str, PiPoly)):
        return PrecComplex.coerce(x).value
    return mpc(x)


# ---------------------------------------------------------------------------
# Complex literal format: "(re,im)" with optional "pi" suffix on each component
# ---------------------------------------------------------------------------

class LiteralError(ValueError):
    def __init__(self, message: str, position: int, text: str):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.position = position
        self.text = text


class Scanner:
    """Whitespace-insensitive cursor used by the literal and symbol parsers."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip_ws()
        return self.text.startswith(s, self.pos)

    def accept(self, s: str) -> bool:
        if self.peek(s):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str) -> None:
        if not self.accept(s):
            self.error(f"expected {s!r}")

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def error(self, message: str):
        raise LiteralError(message, self.pos, self.text)

    def read_int(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error("expected integer")
        return int(self.text[start:self.pos])

    def read_decimal(self) -> Fraction:
        self.skip_ws()
        t, start = self.text, self.pos
        i = start
        while i < len(t) and t[i].isdigit():
            i += 1
        if i < len(t) and t[i] == ".":
            i += 1
            while i < len(t) and t[i].isdigit():
                i += 1
        if i == start or t[start:i] == ".":
            self.error("expected decimal number")
        if i < len(t) and t[i] in "eE":
            j = i + 1
            if j < len(t) and t[j] in "+-":
                j += 1
            k = j
            while k < len(t) and t[k].isdigit():
                k += 1
            if k > j:
                i = k
        self.pos = i
        return Fraction(t[start:i])

    def read_real(self) -> PiPoly:
        """real := decimal [ "pi" ] | "-" real"""
        if self.accept("-"):
            return -self.read_real()
        value = self.read_decimal()
        if self.accept("pi"):
            return PiPoly.rational(value, 0, pi_power=1)
        return PiPoly.rational(value)

    def read_cnum(self) -> PrecComplex:
        """cnum := "(" real "," real ")" | real"""
        if self.accept("("):
            re = self.read_real()
            self.expect(",")
            im = self.read_real()
            self.expect(")")
            return PrecComplex(exact=re + im * PiPoly.rational(0, 1))
        return PrecComplex(exact=self.read_real())


def parse_cnum(text: str) -> PrecComplex:
    """Parse ``(re,im)`` or a bare real, e.g. ``(0,2pi)`` -> 2*pi*i exactly."""
    sc = Scanner(text)
    value = sc.read_cnum()
    if not sc.at_end():
        sc.error("unexpected trailing input")
    return value


def _format_fraction(q: Fraction) -> str:
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        # terminating decimal: print exactly
        digits = max(twos, fives)
        scaled = q * 10 ** digits
        s = str(abs(scaled.numerator))
        if digits:
            s = s.rjust(digits + 1, "0")
            s = s[:-digits] + "." + s[-digits:]
        return ("-" if q < 0 else "") + s
    return _format_mpf(frac_to_mpf(q))


def _format_mpf(x: mpf) -> str:
    digits = int(mp.prec * 0.30103) + 3
    return mp.nstr(x, digits, min_fixed=-4, max_fixed=16, strip_zeros=True).replace("e+", "e")


def format_real(part: tuple[Fraction, int] | mpf) -> str:
    if isinstance(part, tuple):
        q, pi_power = part
        if q == 0:
            return "0"
        return _format_fraction(q) + ("pi" if pi_power == 1 else "")
    return _format_mpf(part)


def format_cnum(x: PrecComplex) -> str:
    """Inverse of :func:`parse_cnum` for values of the form (a + ib) or (a + ib)*pi.

    Other exact forms (mixed pi powers) and inexact values are printed as
    full-precision decimals.
    """
    x = PrecComplex.coerce(x)
    ex = x.exact
    if ex is not None and len(ex.terms) <= 1 and set(ex.terms) <= {0, 1}:
        k, (a, b) = next(iter(ex.terms.items()), (0, (Fraction(0), Fraction(0))))
        return f"({format_real((a, k))},{format_real((b, k))})"
    v = x.value
    return f"({_format_mpf(v.real)},{_format_mpf(v.imag)})"


# ---------------------------------------------------------------------------
# Factorials
# ---------------------------------------------------------------------------

class FactorialCache:
    """Exact integer factorials; grows on demand under a lock."""

    def __init__(self, bound: int = 256):
        self._table = [1]
        self._lock = threading.Lock()
        self.warm(bound)

    def warm(self, bound: int) -> None:
        with self._lock:
            table = self._table
            for k in range(len(table), bound + 1):
                table.append(table[-1] * k)

    def __getitem__(self, k: int) -> int:
        if k < 0:
            raise ValueError("factorial of a negative integer")
        if k >= len(self._table):
            self.warm(2 * k)
        return self._table[k]

    def quotient(self, k: int, m: int) -> int:
        """(k+m)!/m! computed in integers."""
        return self[k + m] // self[m]

    def binomial(self, n: int, k: int) -> int:
        if k < 0 or k > n:
            return 0
        return self[n] // (self[k] * self[n - k])


FACTORIALS = FactorialCache()


# ---------------------------------------------------------------------------
# q_m and the reproducing kernel
# ---------------------------------------------------------------------------

def q_m(x, m: int) -> mpc:
    """Taylor polynomial of exp of order m-1: sum_{k<m} x^k/k!  (q_0 = 0)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    x = as_mpc(x)
    total = mpc(0)
    term = mpc(1)
    for k in range(m):
        if k:
            term = term * x / k
        total += term
    return total


def default_series_tol() -> mpf:
    return mpf(2) ** (-mp.prec - 8)


def _kernel_series_at(x: mpc, m: int, rel_tol=None) -> mpc:
    if rel_tol is None:
        rel_tol = default_series_tol()
    ax = abs(x)
    # guard bits cover the cancellation in exp(x) when Re x << 0
    extra = int(2.9 * float(abs(x))) + 16
    with guard_bits(extra):
        coeff = mpf(1)  # m!/(k+m)!
        power = mpc(1)
        total = mpc(0)
        small = 0
        k = 0
        while True:
            term = coeff * power
            total += term
            # once the term ratio is below 1/2 the tail is at most the last term
            if abs(term) <= rel_tol * abs(total) and 2 * ax < k + m + 1:
                small += 1
                if small >= SMALL_TERM_RUN:
                    break
            else:
                small = 0
            k += 1
            coeff /= (k + m)
            power *= x
            if k > 100000:
                raise ArithmeticError("kernel series did not converge")
    return +total


def kernel(z, w, m: int, rel_tol=None) -> mpc:
    """K_m(z, w) = sum_k m!/(k+m)! (z conj(w))^k, summed to relative tolerance."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    x = as_mpc(z) * mp.conj(as_mpc(w))
    if x == 0:
        return mpc(1)
    return _kernel_series_at(x, m, rel_tol)


def kernel_closed(z, w, m: int) -> mpc:
    """m! (e^x - q_m(x)) / x^m at x = z conj(w); undefined at x = 0."""
    x = as_mpc(z) * mp.conj(as_mpc(w))
    if x == 0:
        raise ZeroDivisionError("closed-form kernel is singular at z*conj(w) = 0")
    ax = float(abs(x))
    extra = 16 + (int(m * -math.log2(ax)) if ax < 1 else 0) + int(1.5 * ax)
    with guard_bits(extra):
        val = FACTORIALS[m] * (mp.exp(x) - q_m(x, m)) / x ** m
    return +val


def kernel_diag_estimate(z, m: int) -> mpf:
    """e^{|z|^2} / (1 + |z|^{2m}); the two-sided size of K_m(z, z)."""
    r2 = abs(as_mpc(z)) ** 2
    return mp.exp(r2) / (1 + r2 ** m)


configure_precision()
