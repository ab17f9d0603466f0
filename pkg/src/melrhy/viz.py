"""Figure-data emission: canonical CSVs plus minimal static SVG charts.

CSVs are the real deliverable; the SVGs are dependency-free line,
scatter, and bar renderings good enough for a quick visual check.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 720, 420
MARGIN = 56
PALETTE = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee",
           "#aa3377", "#bbbbbb", "#000000"]


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]


def _axes(parts: list[str], xlabel: str, ylabel: str) -> None:
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 14}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {(y0 + y1) / 2})">{ylabel}</text>')


def _scale(vals: np.ndarray, lo: float, hi: float, out_lo: float,
           out_hi: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(vals, dtype=float) - lo) / span * (out_hi - out_lo)


def _ticks(parts: list[str], lo: float, hi: float, axis: str) -> None:
    for frac in (0.0, 0.5, 1.0):
        value = lo + frac * (hi - lo)
        if axis == "x":
            px = MARGIN + frac * (WIDTH - 2 * MARGIN)
            parts.append(f'<text x="{px}" y="{HEIGHT - MARGIN + 16}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="10">{value:.3g}</text>')
        else:
            py = HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)
            parts.append(f'<text x="{MARGIN - 6}" y="{py + 3}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="10">{value:.3g}</text>')


def line_svg(path, x: np.ndarray, y: np.ndarray, title: str,
             xlabel: str, ylabel: str) -> None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = _svg_open(title)
    _axes(parts, xlabel, ylabel)
    y_hi = float(y.max()) if y.size and y.max() > 0 else 1.0
    px = _scale(x, float(x.min()), float(x.max()), MARGIN, WIDTH - MARGIN)
    py = _scale(y, 0.0, y_hi, HEIGHT - MARGIN, MARGIN)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    parts.append(f'<polyline points="{pts}" fill="none" '
                 f'stroke="{PALETTE[0]}" stroke-width="1.2"/>')
    _ticks(parts, float(x.min()), float(x.max()), "x")
    _ticks(parts, 0.0, y_hi, "y")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def scatter_svg(path, points: list[tuple[float, float, str, str]], title: str,
                xlabel: str, ylabel: str) -> None:
    """points: (x, y, label, group); one marker per point, color by group."""
    parts = _svg_open(title)
    _axes(parts, xlabel, ylabel)
    xs = np.asarray([p[0] for p in points], dtype=float)
    ys = np.asarray([p[1] for p in points], dtype=float)
    groups = sorted({p[3] for p in points})
    color = {g: PALETTE[i % len(PALETTE)] for i, g in enumerate(groups)}
    lo_x, hi_x = float(xs.min()), float(xs.max())
    lo_y, hi_y = float(ys.min()), float(ys.max())
    px = _scale(xs, lo_x, hi_x, MARGIN + 8, WIDTH - MARGIN - 8)
    py = _scale(ys, lo_y, hi_y, HEIGHT - MARGIN - 8, MARGIN + 8)
    for (x, y, label, group), a, b in zip(points, px, py):
        parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="4" '
                     f'fill="{color[group]}" fill-opacity="0.85">'
                     f'<title>{label}</title></circle>')
    for i, g in enumerate(groups):
        gy = MARGIN + 14 * i
        parts.append(f'<circle cx="{WIDTH - MARGIN + 12}" cy="{gy}" r="4" '
                     f'fill="{color[g]}"/>')
        parts.append(f'<text x="{WIDTH - MARGIN + 20}" y="{gy + 3}" '
                     f'font-family="sans-serif" font-size="9">{g}</text>')
    _ticks(parts, lo_x, hi_x, "x")
    _ticks(parts, lo_y, hi_y, "y")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def bar_svg(path, bars: list[tuple[str, float, float, float]], title: str,
            ylabel: str) -> None:
    """bars: (label, value, ci_low, ci_high) with CI whiskers."""
    parts = _svg_open(title)
    _axes(parts, "", ylabel)
    values = [b[1] for b in bars] + [b[2] for b in bars] + [b[3] for b in bars]
    lo = min(0.0, min(values))
    hi = max(0.0, max(values))
    if hi == lo:
        hi = lo + 1.0
    n = len(bars)
    slot = (WIDTH - 2 * MARGIN) / max(n, 1)
    y_of = lambda v: float(_scale(np.array([v]), lo, hi,
                                  HEIGHT - MARGIN, MARGIN)[0])
    zero_y = y_of(0.0)
    for i, (label, value, ci_lo, ci_hi) in enumerate(bars):
        cx = MARGIN + slot * (i + 0.5)
        w = slot * 0.6
        top = y_of(max(value, 0.0))
        bottom = y_of(min(value, 0.0))
        parts.append(f'<rect x="{cx - w / 2:.2f}" y="{top:.2f}" width="{w:.2f}" '
                     f'height="{max(bottom - top, 0.5):.2f}" '
                     f'fill="{PALETTE[i % len(PALETTE)]}" fill-opacity="0.8"/>')
        parts.append(f'<line x1="{cx:.2f}" y1="{y_of(ci_lo):.2f}" '
                     f'x2="{cx:.2f}" y2="{y_of(ci_hi):.2f}" '
                     f'stroke="black" stroke-width="1.2"/>')
        parts.append(f'<text x="{cx:.2f}" y="{HEIGHT - MARGIN + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="9">{label}</text>')
    parts.append(f'<line x1="{MARGIN}" y1="{zero_y:.2f}" x2="{WIDTH - MARGIN}" '
                 f'y2="{zero_y:.2f}" stroke="#888" stroke-dasharray="4 3"/>')
    _ticks(parts, lo, hi, "y")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
