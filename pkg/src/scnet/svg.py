"""Minimal SVG rendering of ensemble curves: mean line over a shaded band.

One panel per metric, x running from 1.0 (nothing removed) on the left
down to 0.0 on the right.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .attack import METRICS, EnsembleResult

PANEL_W, PANEL_H = 320, 220
MARGIN = dict(left=48, right=14, top=28, bottom=40)
COLORS = {"atsr": "#1f77b4", "stsr": "#2ca02c", "altsr": "#d62728", "scfr": "#9467bd"}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _panel(x: np.ndarray, mean: np.ndarray, lo: np.ndarray, hi: np.ndarray, title: str, color: str,
           ox: float, oy: float, xlabel: str) -> list[str]:
    w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    x0, y0 = ox + MARGIN["left"], oy + MARGIN["top"]

    def px(v):
        return x0 + (1.0 - v) * w

    def py(v):
        return y0 + (1.0 - v) * h

    out = ['<g font-family="sans-serif" font-size="11">',
           f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(oy + 16)}" text-anchor="middle" font-weight="bold">{escape(title)}</text>',
           f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{w}" height="{h}" fill="none" stroke="#444"/>']
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{_fmt(y0 + h)}" x2="{_fmt(px(t))}" y2="{_fmt(y0 + h + 4)}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{_fmt(y0 + h + 15)}" text-anchor="middle">{t:g}</text>')
        out.append(f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(py(t))}" x2="{_fmt(x0)}" y2="{_fmt(py(t))}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 + h + 31)}" text-anchor="middle">{escape(xlabel)}</text>')

    band = [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, hi)]
    band += [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x[::-1], lo[::-1])]
    out.append(f'<polygon points="{" ".join(band)}" fill="{color}" fill-opacity="0.25" stroke="none"/>')
    line = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, mean))
    out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    out.append("</g>")
    return out


def render_ensemble(result: EnsembleResult, metrics=METRICS) -> str:
    """SVG text with a 2-column grid of metric panels."""
    cols = 2
    rows = -(-len(metrics) // cols)
    width, height = cols * PANEL_W, rows * PANEL_H + 24
    head = (f"{result.scale.value} scale, {result.strategy.value}, {result.tier_count} tiers, "
            f"{result.realization_count} realizations (band: 2.5-97.5 percentile)")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(head)}</text>',
    ]
    order = np.argsort(-result.grid, kind="stable")
    x = result.grid[order]
    for k, m in enumerate(metrics):
        ox, oy = (k % cols) * PANEL_W, 24 + (k // cols) * PANEL_H
        parts += _panel(x, result.mean[m][order], result.p2_5[m][order], result.p97_5[m][order],
                        m.upper(), COLORS.get(m, "#333"), ox, oy, f"fraction of {result.scale.value} units remaining")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
