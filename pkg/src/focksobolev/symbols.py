"""Holomorphic symbols as finite sums of atoms z^a e^{Az} and z^a K_m(z, A).

Grammar (whitespace-insensitive)::

    symbol  := term { "+" term } ;
    term    := [ cnum "*" ] factor { "*" factor } ;
    factor  := "z^" int | "z" | "exp(" cnum ")" | "ker(" cnum ")" | cnum ;
    cnum    := "(" real "," real ")" | real ;
    real    := decimal [ "pi" ] | "-" real ;

``ker(A)`` is the Fock-Sobolev kernel K_m(z, A) = sum_k m!/(k+m)! (z conj(A))^k; the
order m is supplied when the symbol is evaluated or expanded, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from mpmath import mp, mpc

from .numerics import (
    FACTORIALS,
    LiteralError,
    PiPoly,
    PrecComplex,
    Scanner,
    as_mpc,
    format_cnum,
    format_real,
    kernel,
)

EXP = "exp"
KER = "ker"
_KIND_ORDER = {EXP: 0, KER: 1}

MAX_POWER = 64
MAX_TERMS = 64

GRAMMAR = """\
symbol  := term { "+" term } ;
term    := [ cnum "*" ] factor { "*" factor } ;
factor  := "z^" int | "z" | "exp(" cnum ")" | "ker(" cnum ")" | cnum ;
cnum    := "(" real "," real ")" | real ;
real    := decimal [ "pi" ] | "-" real ;"""


class SymbolSyntaxError(LiteralError):
    pass


class SymbolOverflowError(OverflowError):
    pass


ZERO = PrecComplex(exact=PiPoly())


@dataclass(frozen=True, eq=False)
class Atom:
    power: int
    kind: str = EXP
    A: PrecComplex = ZERO

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise ValueError(f"unknown atom kind {self.kind!r}")
        if self.power < 0:
            raise ValueError("atom power must be nonnegative")

    @property
    def is_poly(self) -> bool:
        return self.kind == EXP and self.A.is_zero()

    def key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.power, self.A.key())

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.power, self.A.sort_key())

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash((self.kind, self.power, self.A))

    def evaluate(self, z, m: int) -> mpc:
        z = as_mpc(z)
        base = z ** self.power
        if self.kind == EXP:
            return base if self.A.is_zero() else base * mp.exp(self.A.value * z)
        return base * kernel(z, self.A.value, m)


def canonical_atom(atom: Atom) -> Atom:
    # K_m(z, 0) = 1 for every m
    if atom.kind == KER and atom.A.is_zero():
        return Atom(atom.power, EXP, ZERO)
    return atom


@dataclass(frozen=True, eq=False)
class HoloSymbol:
    """Canonical finite sum of (coefficient, atom) pairs."""

    terms: tuple[tuple[PrecComplex, Atom], ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[object, Atom]]) -> "HoloSymbol":
        merged: dict[Atom, PrecComplex] = {}
        for coef, atom in terms:
            atom = canonical_atom(atom)
            coef = PrecComplex.coerce(coef)
            merged[atom] = merged[atom] + coef if atom in merged else coef
        kept = [(c, a) for a, c in merged.items() if not c.is_zero()]
        kept.sort(key=lambda t: t[1].sort_key())
        if len(kept) > MAX_TERMS:
            raise SymbolOverflowError(f"symbol has {len(kept)} terms; the cap is {MAX_TERMS}")
        return cls(tuple(kept))

    @classmethod
    def constant(cls, c=1) -> "HoloSymbol":
        return cls.from_terms([(c, Atom(0))])

    @classmethod
    def exp(cls, A, coef=1, power: int = 0) -> "HoloSymbol":
        return cls.from_terms([(coef, Atom(power, EXP, PrecComplex.coerce(A)))])

    @classmethod
    def ker(cls, A, coef=1, power: int = 0) -> "HoloSymbol":
        return cls.from_terms([(coef, Atom(power, KER, PrecComplex.coerce(A)))])

    @classmethod
    def poly(cls, coeffs: Iterable) -> "HoloSymbol":
        return cls.from_terms([(c, Atom(a)) for a, c in enumerate(coeffs)])

    def __add__(self, other: "HoloSymbol") -> "HoloSymbol":
        return HoloSymbol.from_terms(self.terms + other.terms)

    def scale(self, c) -> "HoloSymbol":
        c = PrecComplex.coerce(c)
        return HoloSymbol.from_terms([(c * k, a) for k, a in self.terms])

    def is_constant(self) -> bool:
        if not self.terms:
            return True
        return len(self.terms) == 1 and self.terms[0][1].is_poly and self.terms[0][1].power == 0

    def constant_value(self) -> PrecComplex:
        if not self.is_constant():
            raise ValueError("symbol is not constant")
        return self.terms[0][0] if self.terms else ZERO

    def has_kernel_atoms(self) -> bool:
        return any(a.kind == KER for _, a in self.terms)

    def is_pure_exponential(self) -> bool:
        """Every atom is e^{Az} with no polynomial factor (class D_1)."""
        return all(a.kind == EXP and a.power == 0 for _, a in self.terms)

    def max_power(self) -> int:
        return max((a.power for _, a in self.terms), default=0)

    def frequencies(self) -> list[PrecComplex]:
        """Distinct nonzero exponential frequencies A of the e^{Az} atoms."""
        seen: dict[tuple, PrecComplex] = {}
        for _, a in self.terms:
            if a.kind == EXP and not a.A.is_zero():
                seen.setdefault(a.A.key(), a.A)
        return list(seen.values())

    def evaluate(self, z, m: int) -> mpc:
        total = mpc(0)
        for c, a in self.terms:
            total += c.value * a.evaluate(z, m)
        return total

    def series(self, m: int, degree: int) -> "SeriesView":
        return series_coefficients(self, m, degree)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HoloSymbol) or len(self.terms) != len(other.terms):
            return False
        return all(a1 == a2 and c1 == c2 for (c1, a1), (c2, a2) in zip(self.terms, other.terms))

    def __hash__(self) -> int:
        return hash(tuple((c, a) for c, a in self.terms))

    def __str__(self) -> str:
        return format_symbol(self)

    def __repr__(self) -> str:
        return f"HoloSymbol({format_symbol(self)!r})"


@dataclass(frozen=True)
class SesquiSymbol:
    """The function w -> f(w) * conj(g(w))."""

    f: HoloSymbol
    g: HoloSymbol

    def swap(self) -> "SesquiSymbol":
        return SesquiSymbol(self.g, self.f)

    def evaluate(self, z, m: int) -> mpc:
        return self.f.evaluate(z, m) * mp.conj(self.g.evaluate(z, m))


@dataclass(frozen=True)
class SeriesView:
    """Taylor coefficients c_0..c_D of a holomorphic symbol at order m."""

    coeffs: tuple
    m: int

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> mpc:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else mpc(0)


def series_coefficients(s: HoloSymbol, m: int, degree: int) -> SeriesView:
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    c = [mpc(0)] * (degree + 1)
    for coef, atom in s.terms:
        a = atom.power
        if a > degree:
            continue
        cv = coef.value
        if atom.kind == EXP:
            if atom.A.is_zero():
                c[a] += cv
                continue
            step = atom.A.value
            term = cv
            for k in range(degree - a + 1):
                if k:
                    term = term * step / k
                c[a + k] += term
        else:
            # K_m(z, A): coefficient m!/(k+m)! conj(A)^k
            step = mp.conj(atom.A.value)
            term = cv
            for k in range(degree - a + 1):
                if k:
                    term = term * step / (k + m)
                c[a + k] += term
    return SeriesView(tuple(c), m)


# ---------------------------------------------------------------------------
# Parsing and printing
# ---------------------------------------------------------------------------

class _SymbolScanner(Scanner):
    def error(self, message: str):
        raise SymbolSyntaxError(message, self.pos, self.text)


def _parse_term(sc: _SymbolScanner) -> tuple[PrecComplex, Atom]:
    coef = PrecComplex(exact=PiPoly.rational(1))
    power = 0
    freq = PiPoly()
    freq_inexact = None
    ker_arg = None
    start = sc.pos
    while True:
        sc.skip_ws()
        if sc.accept("exp"):
            sc.expect("(")
            arg = sc.read_cnum()
            sc.expect(")")
            if arg.exact is not None and freq_inexact is None:
                freq = freq + arg.exact
            else:
                freq_inexact = (freq_inexact or PrecComplex(exact=freq)) + arg
        elif sc.accept("ker"):
            sc.expect("(")
            arg = sc.read_cnum()
            sc.expect(")")
            if ker_arg is not None:
                sc.error("a term may contain at most one ker(...) factor")
            ker_arg = arg
        elif sc.accept("z"):
            if sc.accept("^"):
                power += sc.read_int()
            else:
                power += 1
            if power > MAX_POWER:
                raise SymbolOverflowError(f"power z^{power} exceeds the cap {MAX_POWER} (near position {sc.pos})")
        elif sc.peek("(") or sc.peek("-") or (not sc.at_end() and (sc.text[sc.pos].isdigit() or sc.text[sc.pos] == ".")):
            coef = coef * sc.read_cnum()
        else:
            sc.error("expected factor")
        if not sc.accept("*"):
            break
    A = freq_inexact if freq_inexact is not None else PrecComplex(exact=freq)
    if ker_arg is not None:
        if not A.is_zero():
            raise SymbolSyntaxError("exp(...)*ker(...) is not a representable atom", start, sc.text)
        return coef, Atom(power, KER, ker_arg)
    return coef, Atom(power, EXP, A)


def parse_symbol(text: str) -> HoloSymbol:
    """Parse a symbol expression into canonical form.

    >>> parse_symbol("3*z^2*exp((1,0)) + (0,1)*ker((1,1))").terms[0][1].power
    2
    """
    sc = _SymbolScanner(text)
    if sc.at_end():
        sc.error("empty symbol")
    terms = [_parse_term(sc)]
    while sc.accept("+"):
        terms.append(_parse_term(sc))
        if len(terms) > MAX_TERMS:
            raise SymbolOverflowError(f"more than {MAX_TERMS} terms")
    if not sc.at_end():
        sc.error("unexpected input")
    return HoloSymbol.from_terms(terms)


def _coefficient_factors(c: PrecComplex) -> list[str]:
    """One factor string per pi-power monomial of the coefficient."""
    ex = c.exact
    if ex is None:
        return [format_cnum(c)]
    out = []
    for k, (a, b) in sorted(ex.terms.items()):
        if k == 0:
            out.append(f"({format_real((a, 0))},{format_real((b, 0))})")
        else:
            head = f"({format_real((a, 1))},{format_real((b, 1))})"
            out.append("*".join([head] + ["(1pi,0)"] * (k - 1)))
    return out


def _atom_factors(atom: Atom) -> list[str]:
    out = []
    if atom.power == 1:
        out.append("z")
    elif atom.power > 1:
        out.append(f"z^{atom.power}")
    if atom.kind == KER:
        out.append(f"ker({format_cnum(atom.A)})")
    elif not atom.A.is_zero():
        out.append(f"exp({format_cnum(atom.A)})")
    return out


def format_symbol(s: HoloSymbol) -> str:
    """Print in the parser's grammar; ``parse_symbol(format_symbol(s)) == s``."""
    if not s.terms:
        return "0"
    pieces = []
    for c, atom in s.terms:
        tail = _atom_factors(atom)
        for coef in _coefficient_factors(c):
            pieces.append("*".join(tail if coef == "(1,0)" and tail else [coef] + tail))
    return " + ".join(pieces)


def as_symbol(x) -> HoloSymbol:
    if isinstance(x, HoloSymbol):
        return x
    if isinstance(x, str):
        return parse_symbol(x)
    if isinstance(x, (int, Fraction, complex, float, PrecComplex)):
        return HoloSymbol.constant(x)
    raise TypeError(f"cannot interpret {x!r} as a symbol")
