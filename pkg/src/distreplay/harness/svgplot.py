"""Static SVG line charts of reward curves, written without a plotting library."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..errors import ConfigError
from .reports import Run

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

PLOT_W, HEIGHT = 520, 440
MARGIN_L, MARGIN_T, MARGIN_B = 70, 30, 50
CHAR_W = 7.2  # rough advance of a 12px sans-serif glyph, for sizing the legend


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _series_label(strategy: str, beta: float) -> str:
    return f"{strategy} (beta={beta:g})" if strategy == "distribution_aware" else strategy


def _points(xs, ys, sx, sy) -> str:
    return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))


def render(runs: Sequence[Run], title: str = "mean_reward_100 by episode") -> str:
    """SVG text: one mean line per ``(strategy, beta)``, min-max band when several seeds."""
    if not runs:
        raise ConfigError("no runs to plot")
    groups: dict[tuple[str, float], list[Run]] = {}
    for r in runs:
        groups.setdefault(r.label, []).append(r)

    curves = []
    for label, members in groups.items():
        length = min(len(m.mean_reward_100) for m in members)
        stack = np.vstack([m.mean_reward_100[:length] for m in members])
        curves.append((label, stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0), len(members)))

    n_ep = max(len(c[1]) for c in curves)
    y_lo = min(float(c[2].min()) for c in curves)
    y_hi = max(float(c[3].max()) for c in curves)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = 1.0, float(max(n_ep, 2))

    labels = [f"{_series_label(strategy, beta)} n={n_runs}" for (strategy, beta), *_, n_runs in curves]
    plot_w = PLOT_W
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    legend_x = MARGIN_L + plot_w + 14
    width = int(math.ceil(legend_x + 28 + CHAR_W * max(len(t) for t in labels) + 10))

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{HEIGHT}" '
        f'viewBox="0 0 {width} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN_L}" y="18" font-size="14">{escape(title)}</text>',
    ]
    # axes and grid
    for t in _nice_ticks(y_lo, y_hi):
        y = sy(t)
        out.append(f'<line x1="{MARGIN_L}" y1="{y:.2f}" x2="{MARGIN_L + plot_w}" y2="{y:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    for t in _nice_ticks(x_lo, x_hi):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + plot_h}" x2="{x:.2f}" y2="{MARGIN_T + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 18}" text-anchor="middle">{t:g}</text>')
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>'
    )
    out.append(f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">episode</text>')
    out.append(
        f'<text transform="translate(16 {MARGIN_T + plot_h / 2:.2f}) rotate(-90)" '
        f'text-anchor="middle">mean_reward_100</text>'
    )

    # Bands first so that no band hides another series' mean line.
    opacity = 0.18 if len(curves) <= 2 else 0.08
    for i, (_, mean, lo, hi, n_runs) in enumerate(curves):
        if n_runs > 1:
            xs = np.arange(1, len(mean) + 1)
            band = _points(xs, hi, sx, sy) + " " + _points(xs[::-1], lo[::-1], sx, sy)
            out.append(
                f'<polygon class="band series-{i}" points="{band}" '
                f'fill="{PALETTE[i % len(PALETTE)]}" fill-opacity="{opacity}" stroke="none"/>'
            )
    for i, (_, mean, *_rest) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        xs = np.arange(1, len(mean) + 1)
        out.append(
            f'<polyline class="mean series-{i}" points="{_points(xs, mean, sx, sy)}" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = MARGIN_T + 16 + 20 * i
        out.append(f'<line x1="{legend_x}" y1="{ly - 4}" x2="{legend_x + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="3"/>')
        out.append(f'<text x="{legend_x + 28}" y="{ly}">{escape(labels[i])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(runs: Sequence[Run], path, title: str = "mean_reward_100 by episode") -> None:
    with open(path, "w") as fh:
        fh.write(render(runs, title))
