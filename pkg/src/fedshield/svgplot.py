"""Minimal self-contained SVG line plots (no rendering dependency).

Each plot draws one line per series with an optional shaded mean +/- std
band, axes with five ticks, and a legend. Coordinates are emitted with fixed
two-decimal formatting so identical inputs yield byte-identical files.
"""

from __future__ import annotations

import math

__all__ = ["line_plot", "PALETTE"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2", "#aec7e8")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 62, 22, 42, 52


def _finite(v) -> bool:
    return v is not None and math.isfinite(v)


def _data_range(series):
    xs, ys = [], []
    for s in series:
        for i, x in enumerate(s["x"]):
            m = s["mean"][i]
            if not _finite(m):
                continue
            xs.append(x)
            sd = s.get("std")
            d = sd[i] if sd is not None and _finite(sd[i]) else 0.0
            ys.extend([m - d, m + d])
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = (y1 - y0) * 0.05
    return x0, x1, y0 - pad, y1 + pad


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def line_plot(path: str, title: str, xlabel: str, ylabel: str, series: list) -> None:
    """Write an SVG line chart.

    series items are dicts with keys "label", "x", "mean", and optionally
    "std" (same length as x). Non-finite mean values break the line; bands
    are drawn only where both mean and std are finite.
    """
    x0, x1, y0, y1 = _data_range(series)
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _MT + (1.0 - (y - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.2f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes box and ticks
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    for i in range(5):
        tx = x0 + (x1 - x0) * i / 4
        ty = y0 + (y1 - y0) * i / 4
        gx, gy = px(tx), py(ty)
        parts.append(
            f'<line x1="{gx:.2f}" y1="{_MT + ph}" x2="{gx:.2f}" y2="{_MT + ph + 5}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{gx:.2f}" y="{_MT + ph + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_tick_label(tx)}</text>'
        )
        parts.append(
            f'<line x1="{_ML - 5}" y1="{gy:.2f}" x2="{_ML}" y2="{gy:.2f}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{gy + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_tick_label(ty)}</text>'
        )
    parts.append(
        f'<text x="{_ML + pw / 2:.2f}" y="{_H - 14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_MT + ph / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_MT + ph / 2:.2f})">{ylabel}</text>'
    )

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        sd = s.get("std")
        if sd is not None:
            band = [
                i for i, x in enumerate(s["x"])
                if _finite(s["mean"][i]) and _finite(sd[i])
            ]
            if len(band) >= 2:
                upper = [f"{px(s['x'][i]):.2f},{py(s['mean'][i] + sd[i]):.2f}" for i in band]
                lower = [f"{px(s['x'][i]):.2f},{py(s['mean'][i] - sd[i]):.2f}"
                         for i in reversed(band)]
                parts.append(
                    f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                    f'fill-opacity="0.15" stroke="none"/>'
                )
        segment: list = []
        segments = [segment]
        for i, x in enumerate(s["x"]):
            if _finite(s["mean"][i]):
                segment.append(f"{px(x):.2f},{py(s['mean'][i]):.2f}")
            elif segment:
                segment = []
                segments.append(segment)
        for seg in segments:
            if len(seg) >= 2:
                parts.append(
                    f'<polyline points="{" ".join(seg)}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
        ly = _MT + 14 + 16 * k
        parts.append(
            f'<line x1="{_ML + pw - 130}" y1="{ly - 4}" x2="{_ML + pw - 110}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_ML + pw - 104}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{s["label"]}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts) + "\n")
