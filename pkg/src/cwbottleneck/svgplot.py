"""Minimal self-contained SVG line plots (no plotting dependency).

Output is a pure function of the inputs, so re-running an experiment
reproduces the files byte for byte.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, width: int = 640, height: int = 420) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document string.

    Non-finite y values are skipped.
    """
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom
    pts = {}
    for label, (xs, ys) in series.items():
        keep = [(float(x), float(y)) for x, y in zip(xs, ys)
                if y is not None and math.isfinite(float(y)) and (not logx or x > 0)]
        pts[label] = keep
    allx = [x for p in pts.values() for x, _ in p]
    ally = [y for p in pts.values() for _, y in p]
    if not allx:
        allx, ally = [1.0, 2.0], [0.0, 1.0]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    x0, x1 = tx(min(allx)), tx(max(allx))
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2}" y="{top - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{left - 6}" y="{_fmt(py(yv) + 4)}" text-anchor="end">{_fmt(yv)}</text>')
        out.append(f'<line x1="{left}" y1="{_fmt(py(yv))}" x2="{left + pw}" y2="{_fmt(py(yv))}" '
                   f'stroke="#ddd"/>')
    for x in sorted(set(allx)):
        out.append(f'<text x="{_fmt(px(x))}" y="{top + ph + 16}" text-anchor="middle">{_fmt(x)}</text>')
    for k, (label, p) in enumerate(pts.items()):
        color = _COLORS[k % len(_COLORS)]
        if p:
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in p)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for x, y in p:
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
