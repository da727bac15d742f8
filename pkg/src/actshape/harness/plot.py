"""Self-contained SVG line charts with standard-deviation bands."""
from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

from .curves import Aggregate, EmptyInput, LearningCurve, atomic_write

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=150, top=20, bottom=45)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _series(item):
    if isinstance(item, Aggregate):
        return np.asarray(item.env_steps, float), np.asarray(item.mean, float), np.asarray(item.std, float)
    if isinstance(item, LearningCurve):
        std = np.array([p.std_return for p in item.points], dtype=float)
        return item.steps, item.returns, std
    steps, mean, std = item
    return np.asarray(steps, float), np.asarray(mean, float), np.asarray(std, float)


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".") if x == x else "0"


def render_svg(series: Sequence, labels: Sequence[str] = (), title: str = "") -> str:
    """``series`` items are Aggregates, LearningCurves or ``(steps, mean, std)`` triples."""
    if not series:
        raise EmptyInput("nothing to plot")
    data = [_series(s) for s in series]
    if any(len(d[0]) == 0 for d in data):
        raise EmptyInput("a curve has no points")
    labels = list(labels) + [f"curve {i}" for i in range(len(labels), len(data))]

    x_lo = min(d[0].min() for d in data)
    x_hi = max(d[0].max() for d in data)
    y_lo = min(0.0, min((d[1] - d[2]).min() for d in data))
    y_hi = max(1.0, max((d[1] + d[2]).max() for d in data))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return MARGIN["top"] + (1 - (y - y_lo) / (y_hi - y_lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="14" text-anchor="middle" font-size="12">{escape(title)}</text>')
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN["top"]}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for t in np.linspace(x_lo, x_hi, 5):
        out.append(f'<text x="{sx(t):.2f}" y="{y0 + 16}" text-anchor="middle" font-size="10">{int(round(t))}</text>')
    for t in np.linspace(y_lo, y_hi, 5):
        out.append(f'<text x="{x0 - 6}" y="{sy(t) + 3:.2f}" text-anchor="end" font-size="10">{_num(t)}</text>')
    out.append(f'<text x="{x0 + pw / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle" font-size="11">env steps</text>')
    out.append(
        f'<text x="14" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {MARGIN["top"] + ph / 2:.1f})">mean return</text>'
    )

    for i, ((xs, mean, std), label) in enumerate(zip(data, labels)):
        color = PALETTE[i % len(PALETTE)]
        upper = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, mean + std)]
        lower = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs[::-1], (mean - std)[::-1])]
        out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, mean))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 * i + 8
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 16}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 20}" y="{ly + 4}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series: Sequence, path, labels: Sequence[str] = (), title: str = "") -> Path:
    svg = render_svg(series, labels, title)
    atomic_write(path, svg)
    return Path(path)
