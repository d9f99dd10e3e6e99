"""Minimal deterministic SVG 1.1 chart emitter for trial-record CSVs.

Pure text output with no external assets; identical input bytes always yield
identical output bytes.
"""

from __future__ import annotations

import csv
import math

from .errors import ConfigurationError, ParameterError

CSV_HEADER = ["experiment", "trial", "seed", "n", "d", "k", "eta", "T", "metric", "value"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def read_records(path):
    """Parse a trial-record CSV; malformed rows raise with their line number."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty CSV") from None
        if header != CSV_HEADER:
            raise ConfigurationError(f"{path}:1: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ConfigurationError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                rec = {
                    "experiment": row[0],
                    "trial": int(row[1]),
                    "seed": int(row[2]),
                    "n": int(row[3]),
                    "d": int(row[4]),
                    "k": int(row[5]),
                    "eta": float(row[6]),
                    "T": int(row[7]),
                    "metric": row[8],
                    "value": float(row[9]),
                }
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
            rows.append(rec)
    return rows


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, log: bool):
    if log:
        lo_e, hi_e = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0**e for e in range(int(lo_e), int(hi_e) + 1)]
    if hi == lo:
        return [lo]
    step = 10.0 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * max(1, abs(hi)):
        out.append(v)
        v += step
    return out


def render_svg(records, metric: str, x_axis: str = "n", logx: bool = False, logy: bool = False) -> str:
    pts = [(r[x_axis], r["value"]) for r in records if r["metric"] == metric]
    if not pts:
        avail = sorted({r["metric"] for r in records})
        raise ParameterError(f"no rows for metric {metric!r}; available: {avail}")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if logx and min(xs) <= 0:
        raise ParameterError("log x-axis needs positive values")
    if logy and min(ys) <= 0:
        raise ParameterError("log y-axis needs positive values")

    def tx(v):
        lo, hi = min(xs), max(xs)
        if logx:
            lo, hi, v = math.log10(lo), math.log10(hi), math.log10(v)
        span = (hi - lo) or 1.0
        return _ML + (_W - _ML - _MR) * (v - lo) / span

    def ty(v):
        lo, hi = min(ys), max(ys)
        if logy:
            lo, hi, v = math.log10(lo), math.log10(hi), math.log10(v)
        span = (hi - lo) or 1.0
        return _H - _MB - (_H - _MT - _MB) * (v - lo) / span

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for v in _ticks(min(xs), max(xs), logx):
        if v < min(xs) or v > max(xs):
            continue
        parts.append(
            f'<line x1="{_fmt(tx(v))}" y1="{_H - _MB}" x2="{_fmt(tx(v))}" y2="{_H - _MB + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(tx(v))}" y="{_H - _MB + 18}" font-size="11" text-anchor="middle">{_fmt(v)}</text>'
        )
    for v in _ticks(min(ys), max(ys), logy):
        if v < min(ys) or v > max(ys):
            continue
        parts.append(
            f'<line x1="{_ML - 5}" y1="{_fmt(ty(v))}" x2="{_ML}" y2="{_fmt(ty(v))}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(ty(v) + 4)}" font-size="11" text-anchor="end">{_fmt(v)}</text>'
        )
    # mean per x for the line, individual points as circles
    byx = {}
    for x, y in pts:
        byx.setdefault(x, []).append(y)
    line = sorted((x, sum(v) / len(v)) for x, v in byx.items())
    poly = " ".join(f"{_fmt(tx(x))},{_fmt(ty(y))}" for x, y in line)
    parts.append(f'<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for x, y in pts:
        parts.append(f'<circle cx="{_fmt(tx(x))}" cy="{_fmt(ty(y))}" r="2.5" fill="#1f77b4" fill-opacity="0.5"/>')
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.6g}" y="{_H - 12}" font-size="13" text-anchor="middle">{x_axis}</text>'
    )
    parts.append(
        f'<text x="16" y="{(_MT + _H - _MB) / 2:.6g}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.6g})">{metric}</text>'
    )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.6g}" y="{_MT - 10}" font-size="13" text-anchor="middle">'
        f'{records[0]["experiment"]}: {metric} vs {x_axis}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
