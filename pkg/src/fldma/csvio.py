"""Versioned CSV tables with a commented configuration header."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

SCHEMA_VERSION = 1
SIG_DIGITS = 12


def format_number(x) -> str:
    """Fixed-notation rendering with 12 significant digits, locale independent."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return np.format_float_positional(x, precision=SIG_DIGITS, unique=False, fractional=False, trim="-")


def round_sig(x: float) -> float:
    """The value a reader gets back after :func:`format_number`."""
    return float(format_number(float(x)))


def render(kind: str, header, rows, echo=()) -> str:
    buf = io.StringIO()
    buf.write(f"# fldma-csv v{SCHEMA_VERSION} {kind}\n")
    for line in echo:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def render_pretty(header, rows) -> str:
    cells = [list(header)] + [[format_number(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse(text: str):
    """Return ``(kind, comments, header, rows)`` from :func:`render` output."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# fldma-csv v"):
        raise ValueError("missing fldma-csv version line")
    kind = lines[0].split(" ", 3)[-1] if lines[0].count(" ") >= 3 else ""
    comments = [ln[2:] for ln in lines[1:] if ln.startswith("#")]
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    reader = csv.reader(body)
    header = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return kind, comments, header, rows


def read(path):
    with open(path, newline="") as fh:
        return parse(fh.read())
