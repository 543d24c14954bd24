"""Fixed verification catalogs with pass/fail reports.

Each check yields a :class:`Check` with measured value and tolerance; the
catalogs live in ``data/catalogs.json``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from mpmath import mp, mpc, mpf

from . import berezin as bz
from .lemmas import (
    RowSearchFailure,
    d_l,
    d_l_from_expansion,
    falling_expand,
    lemma_ll1_C,
    resonant_sum_rearranged,
    coefficient_row_search,
    resonant_pair,
)
from .moments import MomentQuery, weighted_gaussian_lhs, weighted_gaussian_rhs, moment_closed, moment_series
from .numerics import PiPoly, PrecComplex, parse_cnum
from .operators import norm_scan, semicommutant
from .symbols import HoloSymbol, SesquiSymbol, parse_symbol

SUITES = ("theoremA", "theoremB", "boundedness", "conjecture", "identities")


@dataclass
class Check:
    id: str
    description: str
    measured: str
    tolerance: str
    passed: bool

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def load_catalogs() -> dict:
    text = resources.files("focksobolev").joinpath("data/catalogs.json").read_text()
    return json.loads(text)


def _s(x, digits: int = 12) -> str:
    if isinstance(x, (mpf, mpc)):
        return mp.nstr(x, digits)
    return str(x)


def _rel(a, b) -> mpf:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale else mpf(0)


def suite_theoremA(cat: dict) -> list[Check]:
    out = []
    tol = mpf(cat["tolerance"])
    zs = [parse_cnum(z).value for z in cat["berezin_points"]]
    for pair in cat["pairs"]:
        f, g = parse_symbol(pair["f"]), parse_symbol(pair["g"])
        for m in cat["ms"]:
            S = semicommutant(f, g, m, cat["N"])
            val = S.max_abs()
            out.append(Check(
                f"theoremA/{pair['id']}/m{m}/matrix",
                f"semicommutant of ({pair['f']}, {pair['g']}) vanishes, N={cat['N']}",
                _s(val), f"< {cat['tolerance']}", bool(val < tol),
            ))
            worst = max(abs(bz.semicommutant_berezin(f, g, m, z).value) for z in zs)
            out.append(Check(
                f"theoremA/{pair['id']}/m{m}/berezin",
                "Berezin transform of f conj g equals f conj g",
                _s(worst), f"< {cat['tolerance']}", bool(worst < tol),
            ))
    return out


def suite_theoremB(cat: dict) -> list[Check]:
    out = []
    floor = mpf(cat["min_entry"])
    for pair in cat["pairs"]:
        f, g = parse_symbol(pair["f"]), parse_symbol(pair["g"])
        for m in cat["ms"]:
            val = semicommutant(f, g, m, cat["N"]).max_abs()
            out.append(Check(
                f"theoremB/{pair['id']}/m{m}",
                f"nonconstant pair ({pair['f']}, {pair['g']}) has a nonzero semicommutant, N={cat['N']}",
                _s(val), f"> {cat['min_entry']}", bool(val > floor),
            ))
    c = cat["contrast"]
    f, g = parse_symbol(c["f"]), parse_symbol(c["g"])
    s0 = semicommutant(f, g, 0, c["N"]).max_abs()
    out.append(Check(
        "theoremB/contrast/m0", "resonant exponentials commute in the Fock space",
        _s(s0), f"< {c['m0_max']}", bool(s0 < mpf(c["m0_max"])),
    ))
    S1 = semicommutant(f, g, 1, c["N"])
    witness = parse_cnum(c["m1_witness"]).value
    err = abs(S1[0, 0] - witness)
    out.append(Check(
        "theoremB/contrast/m1", "the same pair leaves entry [0][0] = 2*pi*i for m = 1",
        _s(S1[0, 0]), f"|x - {c['m1_witness']}| < {c['m1_tol']}", bool(err < mpf(c["m1_tol"])),
    ))
    return out


def suite_boundedness(cat: dict) -> list[Check]:
    out = []
    for case in cat["cases"]:
        scan = norm_scan(parse_symbol(case["f"]), parse_symbol(case["g"]), cat["m"], cat["Ns"])
        out.append(Check(
            f"boundedness/{case['id']}",
            f"norm scan of ({case['f']}, {case['g']}) over N={cat['Ns']}",
            f"{scan.classification} norms={[float('%.6g' % x) for x in scan.norms]}",
            case["expect"], scan.classification == case["expect"],
        ))
    return out


def suite_conjecture(cat: dict) -> list[Check]:
    f, g = parse_symbol(cat["f"]), parse_symbol(cat["g"])
    m = cat["m"]
    scan = norm_scan(f, g, m, cat["Ns"])
    out = [Check(
        "conjecture/bounded", "the semicommutant norm scan plateaus",
        f"{scan.classification} norms={[float('%.6g' % x) for x in scan.norms]}",
        "Plateau", scan.classification == "Plateau",
    )]
    ray = parse_cnum(cat["ray"]).value
    vals = [bz.defect(f, g, m, t * ray) for t in cat["ts"]]
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    out.append(Check(
        "conjecture/defect-increasing", "defect strictly increases along the ray",
        str([_s(v, 8) for v in vals]), "strict", increasing,
    ))
    ratio = vals[-1] / vals[0] if vals[0] else mpf("inf")
    out.append(Check(
        "conjecture/defect-growth", "defect at the last point over the first",
        _s(ratio, 8), f"> {cat['growth_ratio']}", bool(ratio > mpf(cat["growth_ratio"])),
    ))
    return out


def _rand_c(rng: random.Random, r: float) -> mpc:
    return mpc(rng.uniform(-r, r), rng.uniform(-r, r))


def _rand_gauss_rational(rng: random.Random) -> PrecComplex:
    while True:
        a, b = Fraction(rng.randint(-12, 12), 4), Fraction(rng.randint(-12, 12), 4)
        if a or b:
            return PrecComplex(exact=PiPoly.rational(a, b))


def suite_identities(cat: dict) -> list[Check]:
    rng = random.Random(cat["seed"])
    out = []
    tol = mpf(cat["weighted_gaussian_tol"])
    worst = mpf(0)
    for _ in range(cat["weighted_gaussian_cases"]):
        p = [_rand_c(rng, 1) for _ in range(rng.randint(1, 5))]
        q = [_rand_c(rng, 1) for _ in range(rng.randint(1, 5))]
        A, B, z = _rand_c(rng, 1.5), _rand_c(rng, 1.5), _rand_c(rng, 1.5)
        worst = max(worst, _rel(weighted_gaussian_lhs(p, q, A, B, z), weighted_gaussian_rhs(p, q, A, B, z)))
    out.append(Check("identities/weighted-gaussian", "differential-operator form of the polynomial-weighted Gaussian integral",
                     _s(worst, 5), cat["weighted_gaussian_tol"], bool(worst <= tol)))

    ok = all(
        falling_expand(l, m).expansion_holds() and falling_expand(l, m).C[-1] == 1 and falling_expand(l, m).reconstructs()
        for l in range(1, cat["expansion_l"] + 1) for m in range(cat["expansion_m"] + 1)
    )
    out.append(Check("identities/falling-expansion", "falling-factorial expansion: reconstruction, C_l = 1, value at k = l",
                     str(ok), "exact", ok))
    ok = all(
        d_l_from_expansion(l, m) == d_l(l, m) and ((d_l(l, m) != 0) == (m >= 1))
        for l in range(1, cat["expansion_l"] + 1) for m in range(cat["expansion_m"] + 1)
    )
    out.append(Check("identities/d_l", "d_l = 1 - (l+m)!/(l!m!) from the expansion; nonzero exactly when m >= 1",
                     str(ok), "exact", ok))

    worst = mpf(0)
    for _ in range(cat["resonant_cases"]):
        A, B = resonant_pair(_rand_gauss_rational(rng), rng.choice([-2, -1, 1, 2]))
        l, m = rng.randint(1, 6), rng.randint(0, 3)
        c = lemma_ll1_C(A, B, l, m).value
        r = resonant_sum_rearranged(A, B, l, m).value
        scale = max(abs(r), abs(c), mpf(1))
        worst = max(worst, abs(c - r) / scale)
    out.append(Check("identities/resonant-sum", "resonant sum equals its rearranged form",
                     _s(worst, 5), cat["resonant_tol"], bool(worst <= mpf(cat["resonant_tol"]))))

    worst = mpf(0)
    for _ in range(cat["moment_cases"]):
        q = MomentQuery(rng.randint(0, 12), rng.randint(0, 12), PrecComplex(_rand_c(rng, 2.8)), PrecComplex(_rand_c(rng, 2.8)))
        worst = max(worst, _rel(moment_closed(q).mpc, moment_series(q).mpc))
    out.append(Check("identities/moments", "closed-form moments match the series",
                     _s(worst, 5), cat["moment_tol"], bool(worst <= mpf(cat["moment_tol"]))))

    worst = mpf(0)
    for _ in range(cat["berezin_cases"]):
        A, B = PrecComplex(_rand_c(rng, 1.5)), PrecComplex(_rand_c(rng, 1.5))
        m = rng.randint(0, 2)
        z = _rand_c(rng, 2)
        s = SesquiSymbol(HoloSymbol.exp(A), HoloSymbol.exp(B))
        worst = max(worst, _rel(bz.berezin_exp_closed(A, B.conjugate(), m, z).value, bz.berezin_series(s, m, z).value))
    out.append(Check("identities/berezin-routes", "closed and series Berezin transforms agree",
                     _s(worst, 5), cat["berezin_tol"], bool(worst <= mpf(cat["berezin_tol"]))))

    f = parse_symbol("exp((1,0))")
    for m in cat["coefficient_rank_m"]:
        res = []
        for N1 in range(1, 7):
            try:
                res.append(coefficient_row_search(f, m, N1).nonsingular)
            except RowSearchFailure:
                res.append(False)
        expected = [N1 <= m + 1 for N1 in range(1, 7)]
        out.append(Check(f"identities/coefficient-rank/m{m}", "coefficient matrix of e^z is nonsingular exactly when N1 <= m + 1",
                         str(res), str(expected), res == expected))
    return out


_RUNNERS = {
    "theoremA": suite_theoremA,
    "theoremB": suite_theoremB,
    "boundedness": suite_boundedness,
    "conjecture": suite_conjecture,
    "identities": suite_identities,
}


def verify_suite(name: str, catalogs: dict | None = None) -> list[Check]:
    catalogs = load_catalogs() if catalogs is None else catalogs
    names = SUITES if name == "all" else (name,)
    out = []
    for n in names:
        if n not in _RUNNERS:
            raise ValueError(f"unknown suite {n!r}; choose from all, {', '.join(SUITES)}")
        out.extend(_RUNNERS[n](catalogs[n]))
    return out


__all__ = ["Check", "SUITES", "load_catalogs", "verify_suite"]
