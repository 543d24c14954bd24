"""Full-precision JSON and CSV emission.

The standard json module would squeeze mpf values through float, so numbers are
written here as decimal tokens with enough digits to round-trip at the working
precision.  Key order is preserved, so output is byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Iterable

from mpmath import mp, mpc, mpf

from .numerics import PrecComplex, _format_mpf


def number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(float(x)) if x == x and abs(x) != float("inf") else json.dumps(str(x))
    if isinstance(x, Fraction):
        x = mpf(x.numerator) / x.denominator
    x = mpf(x)
    if mp.isinf(x) or mp.isnan(x):
        return json.dumps(str(x))
    return _format_mpf(x)


def _encode(obj, out: list[str], indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, float, mpf, Fraction)):
        out.append(number(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, PrecComplex):
        _encode(obj.value, out, indent, level)
    elif isinstance(obj, (mpc, complex)):
        obj = mpc(obj)
        out.append("[" + number(obj.real) + ", " + number(obj.imag) + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + ": ")
            _encode(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", " if flat else sep)
            if not flat:
                out.append(pad)
            _encode(v, out, indent, level + 1)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _encode(obj, out, indent, 0)
    return "".join(out) + "\n"


def csv_text(header_comment: dict, columns: list[str], rows: Iterable[list]) -> str:
    """CSV with one '#'-prefixed JSON comment line carrying the run configuration."""
    buf = io.StringIO()
    buf.write("# " + dumps(header_comment, indent=0))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else number(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`csv_text`: (header config, rows as dicts of strings)."""
    lines = text.splitlines()
    header = json.loads(lines[0][1:]) if lines and lines[0].startswith("#") else {}
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, list(csv.DictReader(body))


__all__ = ["csv_text", "dumps", "number", "read_csv"]
