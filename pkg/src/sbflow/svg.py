"""Minimal SVG 1.1 plots: histogram-with-density overlays and log-log line plots."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["histogram_overlay", "loglog_plot"]

_W, _H = 480, 320
_ML, _MR, _MT, _MB = 56, 16, 28, 40


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(title)}</text>',
        f'<text x="{_W / 2:.1f}" y="{_H - 6}" text-anchor="middle" font-family="sans-serif" font-size="11">{escape(xlabel)}</text>',
        f'<text x="14" y="{_H / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 14 {_H / 2:.1f})">{escape(ylabel)}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" fill="none" stroke="black"/>',
    ]


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _tick(x: float, y: float, label: str, anchor: str) -> str:
    return f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{escape(label)}</text>'


def _write(lines: list[str], path: str | Path | None) -> str:
    text = "\n".join(lines + ["</svg>"]) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def histogram_overlay(
    edges: Sequence[float],
    heights: Sequence[float],
    curve_x: Sequence[float],
    curve_y: Sequence[float],
    title: str = "",
    path: str | Path | None = None,
) -> str:
    """Histogram bars (density-normalized) with a density polyline on top."""
    x0, x1 = float(edges[0]), float(edges[-1])
    ymax = max(max(heights, default=0.0), max(curve_y, default=0.0)) * 1.1 or 1.0
    sx = _scale(x0, x1, _ML, _W - _MR)
    sy = _scale(0.0, ymax, _H - _MB, _MT)
    out = _frame(title, "x", "density")
    for left, right, h in zip(edges[:-1], edges[1:], heights):
        if h <= 0:
            continue
        out.append(
            f'<rect x="{sx(left):.2f}" y="{sy(h):.2f}" width="{sx(right) - sx(left):.2f}" '
            f'height="{sy(0.0) - sy(h):.2f}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>'
        )
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(curve_x, curve_y))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    for v in (x0, 0.5 * (x0 + x1), x1):
        out.append(_tick(sx(v), _H - _MB + 14, f"{v:g}", "middle"))
    out.append(_tick(_ML - 4, sy(0.0), "0", "end"))
    out.append(_tick(_ML - 4, sy(ymax) + 10, f"{ymax:.3g}", "end"))
    return _write(out, path)


def loglog_plot(
    x: Sequence[float],
    series: dict[str, Sequence[float]],
    title: str = "",
    xlabel: str = "epsilon",
    ylabel: str = "error",
    path: str | Path | None = None,
) -> str:
    """Log-log markers and lines, one polyline per named series; non-positive values are skipped."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    vals = [v for ys in series.values() for v in ys if v > 0]
    xs = [v for v in x if v > 0]
    if not vals or not xs:
        return _write(_frame(title, xlabel, ylabel), path)
    lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
    ly0, ly1 = math.log10(min(vals)), math.log10(max(vals))
    pad = 0.05 * max(ly1 - ly0, 0.1)
    sx = _scale(lx0, lx1, _ML + 8, _W - _MR - 8)
    sy = _scale(ly0 - pad, ly1 + pad, _H - _MB, _MT)
    out = _frame(title, f"{xlabel} (log)", f"{ylabel} (log)")
    for k, (name, ys) in enumerate(series.items()):
        color = colors[k % len(colors)]
        pts = [(sx(math.log10(a)), sy(math.log10(b))) for a, b in zip(x, ys) if a > 0 and b > 0]
        out.append(
            f'<polyline points="{" ".join(f"{p:.2f},{q:.2f}" for p, q in pts)}" fill="none" stroke="{color}"/>'
        )
        out += [f'<circle cx="{p:.2f}" cy="{q:.2f}" r="3" fill="{color}"/>' for p, q in pts]
        out.append(_tick(_W - _MR - 6, _MT + 14 + 12 * k, name, "end").replace("<text ", f'<text fill="{color}" ', 1))
    out.append(_tick(sx(lx0), _H - _MB + 14, f"{10**lx0:.3g}", "middle"))
    out.append(_tick(sx(lx1), _H - _MB + 14, f"{10**lx1:.3g}", "middle"))
    out.append(_tick(_ML - 4, sy(ly0) + 4, f"{10**ly0:.3g}", "end"))
    out.append(_tick(_ML - 4, sy(ly1) + 4, f"{10**ly1:.3g}", "end"))
    return _write(out, path)
