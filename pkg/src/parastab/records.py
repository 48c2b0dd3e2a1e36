"""Flat ``key=value`` text records and CSV helpers shared by the CLI and serializers."""

from __future__ import annotations

import csv
import io
import math

NEG_INF_TEXT = "-inf"


def format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else NEG_INF_TEXT
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def parse_value(text):
    t = text.strip()
    low = t.lower()
    if low == "none":
        return None
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def dump_kv(mapping) -> str:
    """One ``key=value`` pair per line, in insertion order."""
    return "".join(f"{k}={format_value(v)}\n" for k, v in mapping.items())


def parse_kv(text, sep="=") -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if sep not in line:
            raise ValueError(f"line {lineno}: expected 'key {sep} value', got {raw!r}")
        k, v = line.split(sep, 1)
        out[k.strip()] = parse_value(v)
    return out


def fmt17(x) -> str:
    """Float with 17 significant digits (round-trip exact)."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path_or_buf, header, rows):
    """Comma-delimited table, mandatory header, 17 significant digits, ``\\n`` line ends."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt17(x) if not isinstance(x, str) else x for x in r])
    text = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]
