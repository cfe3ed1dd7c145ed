"""Minimal native SVG line plots (log-y), no plotting dependency.

Plots are derived artifacts only; nothing numeric flows back out of here.
"""
from __future__ import annotations

from math import floor, log10
from pathlib import Path
from typing import Sequence

from .report import atomic_write_text

__all__ = ["log_line_plot"]

_COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 760, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _ticks_log(lo: float, hi: float) -> list[float]:
    lo_e = floor(log10(lo))
    hi_e = floor(log10(hi)) + 1
    return [10.0**e for e in range(int(lo_e), int(hi_e) + 1) if lo <= 10.0**e <= hi]


def log_line_plot(path: str | Path, series: dict[str, tuple[Sequence, Sequence]],
                  title: str = "", xlabel: str = "t", ylabel: str = "",
                  logx: bool = False) -> None:
    """Write a log-y (optionally log-x) line plot of ``{label: (x, y)}``."""
    import math

    xs_all, ys_all = [], []
    for x, y in series.values():
        for xi, yi in zip(x, y):
            if yi > 0 and xi > 0 and math.isfinite(yi):
                xs_all.append(float(xi))
                ys_all.append(float(yi))
    if not xs_all:
        raise ValueError("nothing positive to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 2, y_hi * 2
    if x_lo == x_hi:
        x_hi = x_lo + 1

    def tx(x: float) -> float:
        if logx:
            f = (log10(x) - log10(x_lo)) / (log10(x_hi) - log10(x_lo))
        else:
            f = (x - x_lo) / (x_hi - x_lo)
        return _ML + f * (_W - _ML - _MR)

    def ty(y: float) -> float:
        f = (log10(y) - log10(y_lo)) / (log10(y_hi) - log10(y_lo))
        return _H - _MB - f * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    # frame
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="#888"/>'
    )
    for yt in _ticks_log(y_lo, y_hi):
        py = ty(yt)
        parts.append(f'<line x1="{_ML}" y1="{py:.1f}" x2="{_W - _MR}" y2="{py:.1f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{_ML - 6}" y="{py + 4:.1f}" text-anchor="end">'
                     f'1e{int(round(log10(yt)))}</text>')
    x_ticks = _ticks_log(x_lo, x_hi) if logx else [
        x_lo + i * (x_hi - x_lo) / 5 for i in range(6)
    ]
    for xt in x_ticks:
        px = tx(xt)
        label = f"1e{int(round(log10(xt)))}" if logx else f"{xt:g}"
        parts.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                     f'y2="{_H - _MB + 4}" stroke="#888"/>')
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" text-anchor="middle">'
                     f'{label}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" transform="rotate(-90 16 {_H / 2})" '
                 f'text-anchor="middle">{ylabel}</text>')

    for idx, (label, (x, y)) in enumerate(series.items()):
        colour = _COLOURS[idx % len(_COLOURS)]
        pts = [
            f"{tx(float(xi)):.1f},{ty(float(yi)):.1f}"
            for xi, yi in zip(x, y)
            if yi > 0 and xi > 0
        ]
        if not pts:
            continue
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" '
                     f'points="{" ".join(pts)}"/>')
        ly = _MT + 16 + 16 * idx
        parts.append(f'<line x1="{_W - _MR - 130}" y1="{ly}" x2="{_W - _MR - 105}" '
                     f'y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 100}" y="{ly + 4}">{label}</text>')
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
