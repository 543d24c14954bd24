"""Command-line entry point ``fs``.

Exit codes: 0 success, 1 usage error, 2 numerical anomaly (non-convergence,
route disagreement, failed verification check).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from mpmath import mp, mpc, mpf

from . import __version__
from . import berezin as bz
from .moments import SERIES_TERM_CAP, QuadratureAccuracyWarning, moment
from .numerics import LiteralError, configure_precision, kernel, kernel_closed, parse_cnum
from .operators import (
    MAX_KER_DEGREE,
    MAX_TRUNCATION,
    ZERO_NORM,
    CoherentTailWarning,
    norm_scan,
    operator_norm,
    semicommutant,
    toeplitz_matrix,
)
from .serialize import csv_text, dumps
from .symbols import GRAMMAR, SesquiSymbol, SymbolOverflowError, parse_symbol
from .verify import SUITES, verify_suite

EXIT_OK, EXIT_USAGE, EXIT_ANOMALY = 0, 1, 2
ROUTE_AGREEMENT = 1e-10

EPILOG = f"""\
complex literals:  (re,im), each part a decimal optionally suffixed by pi,
                   e.g. (0,2pi) = 2*pi*i, (1,0) = 1

symbol grammar (whitespace-insensitive):
{GRAMMAR}

ker(A) denotes K_m(z, A); m comes from --m.
"""


class UsageError(Exception):
    pass


class AnomalyError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    precision_bits: int
    zero_threshold: float = ZERO_NORM
    route_agreement: float = ROUTE_AGREEMENT
    caps: dict = field(default_factory=lambda: {
        "N": MAX_TRUNCATION, "degree": MAX_KER_DEGREE, "terms": SERIES_TERM_CAP,
    })
    output: str | None = None
    threads: int = 1
    arguments: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        # thread count does not affect results; omitted so output is byte-identical across it
        out = asdict(self)
        del out["threads"]
        return out


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _cnum(text: str):
    try:
        return parse_cnum(text)
    except LiteralError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _symbol(text: str):
    try:
        return parse_symbol(text)
    except (LiteralError, SymbolOverflowError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _real_list(text: str) -> list[str]:
    parts = [x.strip() for x in text.split(",") if x.strip()]
    for p in parts:
        try:
            mpf(p)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a decimal: {p!r}")
    return parts


def _axis(text: str) -> list[mpf]:
    lo, hi, n = text.split(":")
    n = int(n)
    if n < 1:
        raise ValueError("grid count must be positive")
    lo, hi = mpf(lo), mpf(hi)
    if n == 1:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _grid(text: str) -> list[mpc]:
    try:
        re_part, im_part = text.split(",")
        xs, ys = _axis(re_part), _axis(im_part)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must read re0:re1:n,im0:im1:n, got {text!r}")
    return [mpc(x, y) for x in xs for y in ys]


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_kernel(args) -> object:
    z, w = args.z.value, args.w.value
    if args.form == "closed":
        val = kernel_closed(z, w, args.m)
    else:
        val = kernel(z, w, args.m)
    return {"value": val, "form": args.form}


def _cmd_moment(args) -> object:
    res = moment(args.j, args.k, args.A, args.B, path=args.path)
    return {"value": res.mpc, "path": res.path, "err": res.err_estimate}


def _cmd_toeplitz(args) -> object:
    T = toeplitz_matrix(SesquiSymbol(args.f, args.g), args.m, args.N)
    return T.to_dict()


def _cmd_semicomm(args) -> object:
    S = semicommutant(args.f, args.g, args.m, args.N)
    out = S.to_dict()
    if args.norm:
        out["norm"] = operator_norm(S)
    return out


def _cmd_normscan(args, config: RunConfig) -> str:
    scan = norm_scan(args.f, args.g, args.m, args.Ns, threads=config.threads)
    rows = [[n, x, scan.classification] for n, x in scan.entries]
    return csv_text(config.to_dict(), ["N", "norm", "classification"], rows)


def _cmd_berezin(args, config: RunConfig) -> str:
    s = SesquiSymbol(args.f, args.g)
    rows = []
    for z in args.grid:
        sample = bz.berezin(s, args.m, z, route=args.route)
        if args.check:
            ref = bz.berezin(s, args.m, z, route=bz.SERIES).value.value
            val = sample.value.value
            scale = max(abs(ref), mpf(1))
            if abs(val - ref) / scale > ROUTE_AGREEMENT:
                raise AnomalyError(
                    f"route {sample.route} disagrees with series at z = {mp.nstr(z, 8)}: "
                    f"{mp.nstr(abs(val - ref) / scale, 5)}"
                )
        v = sample.value.value
        rows.append([z.real, z.imag, v.real, v.imag, sample.route])
    return csv_text(config.to_dict(), ["re", "im", "value_re", "value_im", "route"], rows)


def _cmd_dfg(args, config: RunConfig) -> str:
    ray = args.ray.value
    rows = []
    for t in args.ts:
        z = mpf(t) * ray
        rows.append([mpf(t), z.real, z.imag, bz.defect(args.f, args.g, args.m, z)])
    return csv_text(config.to_dict(), ["t", "re", "im", "defect"], rows)


def _cmd_verify(args) -> tuple[object, bool]:
    checks = verify_suite(args.suite)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.id}: {c.measured}", file=sys.stderr)
    return [c.to_dict() for c in checks], all(c.passed for c in checks)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--precision", type=int, default=None,
                   help="mantissa bits (default: $FS_PRECISION_BITS or 256)")
    g.add_argument("--threads", type=int, default=1, help="worker threads for norm estimation")
    g.add_argument("--json-errors", action="store_true", help="emit errors as JSON on stderr")
    g.add_argument("--out", default=None, help="output file (default: stdout)")

    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="fs", description=__doc__.splitlines()[0], epilog=EPILOG, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"fs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                              epilog=EPILOG, formatter_class=fmt)

    p = add("kernel", "evaluate the reproducing kernel K_m(z, w)")
    p.add_argument("--z", type=_cnum, required=True)
    p.add_argument("--w", type=_cnum, required=True)
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--form", choices=("series", "closed"), default="series")

    p = add("moment", "Gaussian moment I_{j,k}(A, B') where B' is the conjugate frequency")
    p.add_argument("--j", type=_nonneg, required=True)
    p.add_argument("--k", type=_nonneg, required=True)
    p.add_argument("--A", type=_cnum, required=True)
    p.add_argument("--B", type=_cnum, required=True, help="the second moment parameter B' (already conjugated)")
    p.add_argument("--path", choices=("closed", "series", "quad"), default="closed")

    for name, help_text in (("toeplitz", "truncated Toeplitz matrix of the symbol f*conj(g)"),
                            ("semicomm", "truncated semicommutant T_{f conj g} - T_f T_{conj g}")):
        p = add(name, help_text)
        p.add_argument("--m", type=_nonneg, required=True)
        p.add_argument("--N", type=_nonneg, required=True)
        p.add_argument("--f", type=_symbol, required=True)
        p.add_argument("--g", type=_symbol, required=True)
        if name == "semicomm":
            p.add_argument("--norm", action="store_true", help="also report the spectral norm")

    p = add("normscan", "semicommutant norms over a list of truncations, with a growth verdict")
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--f", type=_symbol, required=True)
    p.add_argument("--g", type=_symbol, required=True)
    p.add_argument("--Ns", type=_int_list, default=[8, 16, 32, 64])

    p = add("berezin", "Berezin transform of f*conj(g) on a rectangular grid")
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--f", type=_symbol, required=True)
    p.add_argument("--g", type=_symbol, required=True)
    p.add_argument("--grid", type=_grid, required=True, help='"re0:re1:n,im0:im1:n"')
    p.add_argument("--route", choices=(bz.AUTO, bz.CLOSED, bz.SERIES, bz.QUADRATURE), default=bz.AUTO)
    p.add_argument("--check", action="store_true", help="cross-check every point against the series route")

    p = add("dfg", "Hankel-product defect along a ray")
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--f", type=_symbol, required=True)
    p.add_argument("--g", type=_symbol, required=True)
    p.add_argument("--ray", type=_cnum, default=parse_cnum("(1,0)"))
    p.add_argument("--ts", type=_real_list, default=["1", "2", "3", "4", "5"])

    p = add("verify", "run a fixed verification catalog")
    p.add_argument("--suite", choices=("all",) + SUITES, default="all")
    return parser


def _raw_arguments(argv: list[str]) -> dict:
    """The command's own flags as given, for the output header."""
    out, key = {}, None
    skip = {"--out", "--json-errors", "--precision", "--threads"}  # recorded elsewhere or result-neutral
    it = iter(argv[1:])
    for tok in it:
        if tok.startswith("--"):
            key = tok[2:]
            if tok in skip:
                if tok != "--json-errors":
                    next(it, None)
                key = None
                continue
            out[key] = True
        elif key is not None:
            out[key] = tok
            key = None
    return out


def _report_error(kind: str, message: str, code: int, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": kind, "message": message, "exit": code}), file=sys.stderr)
    else:
        print(f"fs: {kind}: {message}", file=sys.stderr)
    return code


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _report_error("usage", str(exc), EXIT_USAGE, as_json)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    try:
        bits = configure_precision(args.precision)
    except ValueError as exc:
        return _report_error("usage", str(exc), EXIT_USAGE, as_json)
    if args.threads < 1:
        return _report_error("usage", "--threads must be at least 1", EXIT_USAGE, as_json)
    config = RunConfig(
        command=args.command, precision_bits=bits, output=args.out,
        threads=args.threads, arguments=_raw_arguments(argv),
    )

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", QuadratureAccuracyWarning)
            warnings.simplefilter("error", CoherentTailWarning)
            ok = True
            if args.command in ("normscan", "berezin", "dfg"):
                runner = {"normscan": _cmd_normscan, "berezin": _cmd_berezin, "dfg": _cmd_dfg}[args.command]
                text = runner(args, config)
            else:
                if args.command == "verify":
                    payload, ok = _cmd_verify(args)
                    body = {"config": config.to_dict(), "checks": payload}
                else:
                    runner = {"kernel": _cmd_kernel, "moment": _cmd_moment, "toeplitz": _cmd_toeplitz,
                              "semicomm": _cmd_semicomm}[args.command]
                    body = {"config": config.to_dict(), **runner(args)}
                text = dumps(body)
    except (AnomalyError, ArithmeticError, RuntimeWarning) as exc:
        return _report_error("numerical", f"{type(exc).__name__}: {exc}", EXIT_ANOMALY, as_json)
    except (ValueError, LookupError) as exc:
        return _report_error("usage", f"{type(exc).__name__}: {exc}", EXIT_USAGE, as_json)

    _emit(text, args.out)
    if not ok:
        return _report_error("numerical", "one or more verification checks failed", EXIT_ANOMALY, as_json)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
