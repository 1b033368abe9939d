"""Dependency-free SVG line charts for metrics-over-time curves.

Output bytes are a pure function of the input series: fixed canvas,
fixed palette, fixed float formatting.
"""

from __future__ import annotations

import io

__all__ = ["metric_lines_svg", "CANONICAL_ORDER"]

CANONICAL_ORDER = ("or", "ipw", "dr", "dr-clip", "balance")

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")

_WIDTH, _HEIGHT = 640, 400
_ML, _MR, _MT, _MB = 60, 150, 20, 45


def _order(names) -> list[str]:
    known = [n for n in CANONICAL_ORDER if n in names]
    extra = sorted(n for n in names if n not in CANONICAL_ORDER)
    return known + extra


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _f(v: float) -> str:
    return format(v, ".2f")


def metric_lines_svg(series: dict[str, list[tuple[float, float]]], y_label: str) -> bytes:
    """One polyline per estimator over time; legend lists the series present."""
    if not series or all(not pts for pts in series.values()):
        raise ValueError("no data series to plot")
    names = _order([n for n, pts in series.items() if pts])
    xs = [x for n in names for x, _ in series[n]]
    ys = [y for n in names for _, y in series[n]]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MT + (y_hi - y) / (y_hi - y_lo) * plot_h

    buf = io.StringIO()
    buf.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">\n'
    )
    buf.write(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>\n')
    axis = 'stroke="#333333" stroke-width="1"'
    buf.write(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_HEIGHT - _MB}" {axis}/>\n'
        f'<line x1="{_ML}" y1="{_HEIGHT - _MB}" x2="{_WIDTH - _MR}" y2="{_HEIGHT - _MB}" {axis}/>\n'
    )
    for tx in _ticks(x_lo, x_hi):
        buf.write(
            f'<line x1="{_f(px(tx))}" y1="{_HEIGHT - _MB}" x2="{_f(px(tx))}" '
            f'y2="{_HEIGHT - _MB + 4}" {axis}/>\n'
            f'<text x="{_f(px(tx))}" y="{_HEIGHT - _MB + 16}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{format(tx, ".4g")}</text>\n'
        )
    for ty in _ticks(y_lo, y_hi):
        buf.write(
            f'<line x1="{_ML - 4}" y1="{_f(py(ty))}" x2="{_ML}" y2="{_f(py(ty))}" {axis}/>\n'
            f'<text x="{_ML - 6}" y="{_f(py(ty) + 3)}" font-size="10" '
            f'text-anchor="end" font-family="sans-serif">{format(ty, ".4g")}</text>\n'
        )
    buf.write(
        f'<text x="{_ML + plot_w / 2:.0f}" y="{_HEIGHT - 8}" font-size="11" '
        f'text-anchor="middle" font-family="sans-serif">t</text>\n'
        f'<text x="14" y="{_MT + plot_h / 2:.0f}" font-size="11" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 14 {_MT + plot_h / 2:.0f})">'
        f"{y_label}</text>\n"
    )
    for i, name in enumerate(names):
        color = _PALETTE[i % len(_PALETTE)]
        pts = sorted(series[name])
        path = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in pts)
        buf.write(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>\n'
        )
        ly = _MT + 14 + 18 * i
        lx = _WIDTH - _MR + 12
        buf.write(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
            f'stroke-width="1.5"/>\n'
            f'<text x="{lx + 28}" y="{ly + 4}" font-size="11" '
            f'font-family="sans-serif">{name}</text>\n'
        )
    buf.write("</svg>\n")
    return buf.getvalue().encode("utf-8")
