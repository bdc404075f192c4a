"""CSV writer and a dependency-free SVG line-plot emitter."""

from __future__ import annotations

import csv
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from ris_sm.simulator import BerRecord


@dataclass(frozen=True)
class BoundPoint:
    snr_db: float
    abep_bound: float


@dataclass(frozen=True)
class CapacityPoint:
    snr_db: float
    ec_bpcu: float


@dataclass(frozen=True)
class FlopRecord:
    detector: str
    L: int
    nt: int
    M: int
    mults: int
    adds: int


@dataclass(frozen=True)
class PowerPoint:
    antenna: int
    mean_power: float


SCHEMAS = {
    BerRecord: ("snr_db", "detector", "ber", "bit_errors", "bits_sent", "trials"),
    BoundPoint: ("snr_db", "abep_bound"),
    CapacityPoint: ("snr_db", "ec_bpcu"),
    FlopRecord: ("detector", "L", "nt", "M", "mults", "adds"),
    PowerPoint: ("antenna", "mean_power"),
}


def _fmt(v) -> str:
    # repr of a Python float is the shortest string that round-trips
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sort_key(rec):
    if isinstance(rec, FlopRecord):
        return (rec.L, rec.nt, rec.M, rec.detector)
    if isinstance(rec, PowerPoint):
        return (rec.antenna,)
    return (rec.snr_db, getattr(rec, "detector", ""))


def write_csv(records, path) -> Path:
    """Write homogeneous records to ``path`` atomically; nothing is created on error."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    kinds = {type(r) for r in records}
    if len(kinds) != 1 or next(iter(kinds)) not in SCHEMAS:
        raise TypeError(f"records must all be one of {[t.__name__ for t in SCHEMAS]}, got {sorted(t.__name__ for t in kinds)}")
    columns = SCHEMAS[kinds.pop()]
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)  # excel dialect: RFC 4180 quoting and CRLF
            w.writerow(columns)
            for rec in sorted(records, key=_sort_key):
                w.writerow([_fmt(getattr(rec, col)) for col in columns])
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- SVG --------------------------------------------------------------------

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=90, right=190, top=50, bottom=70)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def emit_plot(
    series, path, *, log_y: bool, title: str = "", xlabel: str = "SNR (dB)", ylabel: str = "", y_floor: float = 1e-7
) -> Path:
    """Write an 800x600 SVG with one polyline per series.

    ``series`` maps a legend label to ``(x, y)`` sequences.  With ``log_y``
    zero values, and values under ``y_floor``, are dropped with a note on
    stderr.  Non-finite points are always dropped.
    """
    clean = {}
    for label, (xs, ys) in series.items():
        if len(xs) != len(ys):
            raise ValueError(f"series {label!r}: x and y lengths differ")
        if len(xs) < 2:
            raise ValueError(f"series {label!r} needs at least 2 points, got {len(xs)}")
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(float(x)) and math.isfinite(float(y))]
        if log_y:
            zeros = sum(y <= 0 for _, y in pts)
            tiny = sum(0 < y < y_floor for _, y in pts)
            if zeros:
                print(f"note: {zeros} zero-valued point(s) omitted from log plot of {label!r}", file=sys.stderr)
            if tiny:
                print(f"note: {tiny} point(s) below {y_floor:g} omitted from log plot of {label!r}", file=sys.stderr)
            pts = [(x, y) for x, y in pts if y >= y_floor and y > 0]
        if pts:
            clean[label] = sorted(pts)
    if not clean:
        raise ValueError("nothing to plot")

    xs = [x for pts in clean.values() for x, _ in pts]
    ys = [y for pts in clean.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    if log_y:
        y0, y1 = math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys)))
        if y1 == y0:
            y1 += 1
    else:
        y0, y1 = min(0.0, min(ys)), max(ys)
        if y1 > y0:
            y1 += 0.05 * (y1 - y0)
    if not x1 > x0 or not y1 > y0:
        raise ValueError(f"degenerate axis range: x [{x0}, {x1}], y [{y0}, {y1}]")

    left, top = MARGIN["left"], MARGIN["top"]
    pw, ph = WIDTH - left - MARGIN["right"], HEIGHT - top - MARGIN["bottom"]

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        v = math.log10(y) if log_y else y
        return top + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{top}" x2="{X:.2f}" y2="{top + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" font-size="12" text-anchor="middle">{t:g}</text>')
    if log_y:
        yticks = [(10.0**e, f"1e{e}") for e in range(int(y0), int(y1) + 1)]
    else:
        yticks = [(t, f"{t:g}") for t in _nice_ticks(y0, y1)]
    for t, text in yticks:
        Y = py(t)
        out.append(f'<line x1="{left}" y1="{Y:.2f}" x2="{left + pw}" y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{Y + 4:.2f}" font-size="12" text-anchor="end">{text}</text>')

    for i, (label, pts) in enumerate(clean.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{coords}"/>')
        ly = top + 16 + 20 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="12">{escape(label)}</text>')

    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 20}" font-size="14" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="22" y="{top + ph / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 22 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{left + pw / 2}" y="30" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")

    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(out) + "\n")
    os.replace(tmp, path)
    return path
