"""Minimal static SVG charts: bars, lines, scatter and tree drawings.

Coordinates are printed with fixed precision so output is byte-stable.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

W, H = 480, 360
ML, MR, MT, MB = 60, 20, 36, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]


def _axes(xlabel: str, ylabel: str, xr: tuple, yr: tuple, xlog=False, ylog=False) -> list:
    x0, y0, x1, y1 = ML, H - MB, W - MR, MT
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xr[0] + frac * (xr[1] - xr[0])
        yv = yr[0] + frac * (yr[1] - yr[0])
        xs = 10 ** xv if xlog else xv
        ys = 10 ** yv if ylog else yv
        out.append(f'<text x="{_f(x0 + frac * (x1 - x0))}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{xs:.3g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{_f(y0 - frac * (y0 - y1) + 3)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{ys:.3g}</text>')
    return out


def _scale(v: float, lo: float, hi: float, a: float, b: float) -> float:
    if hi == lo:
        return (a + b) / 2
    return a + (v - lo) / (hi - lo) * (b - a)


def bar_chart(labels: Sequence, values: Sequence[float], title: str, xlabel: str, ylabel: str) -> str:
    out = _header(title)
    vmax = max(values) if values and max(values) > 0 else 1.0
    out += _axes(xlabel, ylabel, (0, len(values)), (0, vmax))
    n = max(1, len(values))
    bw = (W - ML - MR) / n
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = _scale(v, 0, vmax, 0, H - MB - MT)
        x = ML + i * bw
        out.append(f'<rect x="{_f(x + 0.1 * bw)}" y="{_f(H - MB - h)}" width="{_f(0.8 * bw)}" '
                   f'height="{_f(h)}" fill="{PALETTE[0]}"><title>{escape(str(lab))}: {v}</title></rect>')
        out.append(f'<text x="{_f(x + bw / 2)}" y="{H - MB + 28}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="9">{escape(str(lab))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _finite_log(v: float, log: bool):
    if not log:
        return v if math.isfinite(v) else None
    return math.log10(v) if v > 0 and math.isfinite(v) else None


def line_chart(series: dict, title: str, xlabel: str, ylabel: str,
               xlog: bool = False, ylog: bool = False, markers: bool = False) -> str:
    """``series`` maps a legend label to ``(xs, ys)``; non-finite points are dropped."""
    pts = {}
    for name, (xs, ys) in series.items():
        pts[name] = [
            (a, b) for a, b in ((_finite_log(x, xlog), _finite_log(y, ylog)) for x, y in zip(xs, ys))
            if a is not None and b is not None
        ]
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    xr, yr = (min(allx), max(allx)), (min(ally), max(ally))
    out = _header(title) + _axes(xlabel, ylabel, xr, yr, xlog, ylog)
    for i, (name, p) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = [(_scale(x, *xr, ML, W - MR), _scale(y, *yr, H - MB, MT)) for x, y in p]
        if len(coords) > 1 and not markers:
            d = " ".join(f"{_f(x)},{_f(y)}" for x, y in coords)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            for x, y in coords:
                out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="2" fill="{color}"/>')
        out.append(f'<text x="{W - MR - 4}" y="{MT + 14 * (i + 1)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11" fill="{color}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    return line_chart(series, title, xlabel, ylabel, markers=True)


def tree_drawing(states: Sequence, parents: Sequence[int], lower: Sequence[float], upper: Sequence[float],
                 title: str, path: Sequence | None = None) -> str:
    """Planar tree edges (first two state components) with an optional highlighted path."""
    out = _header(title)
    side = min(W - ML - MR, H - MB - MT)

    def px(s):
        return (_scale(s[0], lower[0], upper[0], ML, ML + side),
                _scale(s[1], lower[1], upper[1], MT + side, MT))

    out.append(f'<rect x="{ML}" y="{MT}" width="{side}" height="{side}" fill="none" stroke="black"/>')
    for i in range(1, len(states)):
        a, b = px(states[parents[i]]), px(states[i])
        out.append(f'<line x1="{_f(a[0])}" y1="{_f(a[1])}" x2="{_f(b[0])}" y2="{_f(b[1])}" '
                   f'stroke="#888" stroke-width="0.5"/>')
    if path:
        d = " ".join(f"{_f(x)},{_f(y)}" for x, y in (px(s) for s in path))
        out.append(f'<polyline points="{d}" fill="none" stroke="{PALETTE[1]}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
