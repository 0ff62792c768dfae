"""Tiny self-contained SVG line plots.

Writes deterministic text, no display stack involved: same data in,
byte-identical file out. Only what the CLI needs: linear or log axes,
solid/dashed polylines, decade ticks, a legend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = ["Series", "line_plot_svg"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf")

_W, _H = 720, 520
_ML, _MR, _MT, _MB = 80, 24, 40, 64


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    dashed: bool = False
    color: str | None = None


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_values(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        lo_d = math.floor(math.log10(lo))
        hi_d = math.ceil(math.log10(hi))
        return [10.0**d for d in range(int(lo_d), int(hi_d) + 1)
                if lo <= 10.0**d <= hi]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(v)
        v += step
    return ticks


def _tick_label(v: float, log: bool) -> str:
    if log:
        exp = round(math.log10(v))
        return f"1e{exp}"
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:g}"


def line_plot_svg(series: Sequence[Series], xlabel: str, ylabel: str,
                  title: str = "", log_x: bool = False,
                  log_y: bool = False, comment: str | None = None) -> str:
    xs, ys = [], []
    for s in series:
        for xv, yv in zip(s.x, s.y):
            if not (math.isfinite(xv) and math.isfinite(yv)):
                continue
            if (log_x and xv <= 0) or (log_y and yv <= 0):
                continue
            xs.append(xv)
            ys.append(yv)
    if not xs:
        raise ValueError("nothing plottable")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo * 0.9 if x_lo else -1.0, x_hi * 1.1 if x_hi else 1.0
    if y_lo == y_hi:
        y_lo, y_hi = y_lo * 0.9 if y_lo else -1.0, y_hi * 1.1 if y_hi else 1.0

    def tx(v: float) -> float:
        if log_x:
            f = (math.log10(v) - math.log10(x_lo)) \
                / (math.log10(x_hi) - math.log10(x_lo))
        else:
            f = (v - x_lo) / (x_hi - x_lo)
        return _ML + f * (_W - _ML - _MR)

    def ty(v: float) -> float:
        if log_y:
            f = (math.log10(v) - math.log10(y_lo)) \
                / (math.log10(y_hi) - math.log10(y_lo))
        else:
            f = (v - y_lo) / (y_hi - y_lo)
        return _H - _MB - f * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
           f'height="{_H}" viewBox="0 0 {_W} {_H}">']
    if comment:
        out.append(f'<!-- {comment} -->')
    out += [f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
           f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>']
    font = 'font-family="sans-serif" font-size="13"'
    if title:
        out.append(f'<text x="{_W // 2}" y="24" text-anchor="middle" '
                   f'{font}>{title}</text>')
    for v in _tick_values(x_lo, x_hi, log_x):
        px = tx(v)
        out.append(f'<line x1="{_fmt(px)}" y1="{_H - _MB}" x2="{_fmt(px)}" '
                   f'y2="{_H - _MB + 6}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_H - _MB + 22}" '
                   f'text-anchor="middle" {font}>{_tick_label(v, log_x)}'
                   '</text>')
    for v in _tick_values(y_lo, y_hi, log_y):
        py = ty(v)
        out.append(f'<line x1="{_ML - 6}" y1="{_fmt(py)}" x2="{_ML}" '
                   f'y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{_ML - 10}" y="{_fmt(py + 4)}" '
                   f'text-anchor="end" {font}>{_tick_label(v, log_y)}</text>')
    out.append(f'<text x="{_W // 2}" y="{_H - 16}" text-anchor="middle" '
               f'{font}>{xlabel}</text>')
    out.append(f'<text x="20" y="{_H // 2}" text-anchor="middle" {font} '
               f'transform="rotate(-90 20 {_H // 2})">{ylabel}</text>')
    legend_y = _MT + 16
    for i, s in enumerate(series):
        color = s.color or _PALETTE[i % len(_PALETTE)]
        dash = ' stroke-dasharray="7 4"' if s.dashed else ""
        pts = []
        for xv, yv in zip(s.x, s.y):
            if not (math.isfinite(xv) and math.isfinite(yv)):
                continue
            if (log_x and xv <= 0) or (log_y and yv <= 0):
                continue
            pts.append(f"{_fmt(tx(xv))},{_fmt(ty(yv))}")
        if not pts:
            continue
        out.append(f'<polyline fill="none" stroke="{color}" '
                   f'stroke-width="1.6"{dash} points="{" ".join(pts)}"/>')
        if s.label:
            lx = _W - _MR - 170
            out.append(f'<line x1="{lx}" y1="{legend_y - 4}" x2="{lx + 26}" '
                       f'y2="{legend_y - 4}" stroke="{color}"'
                       f'{dash} stroke-width="1.6"/>')
            out.append(f'<text x="{lx + 32}" y="{legend_y}" {font}>'
                       f'{s.label}</text>')
            legend_y += 18
    out.append("</svg>")
    return "\n".join(out) + "\n"
