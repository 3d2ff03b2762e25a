"""Minimal hand-written SVG output (no plotting backend required)."""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

CELL = 14
MARGIN = 60
LOW_RGB = (255, 255, 255)
HIGH_RGB = (8, 48, 107)

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _color(value: float, vmax: float) -> str:
    frac = 0.0 if vmax <= 0 else min(max(value / vmax, 0.0), 1.0)
    rgb = [round(lo + (hi - lo) * frac) for lo, hi in zip(LOW_RGB, HIGH_RGB)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(
    overlap: np.ndarray,
    truth_ids: Optional[Sequence[int]] = None,
    pred_ids: Optional[Sequence[int]] = None,
) -> str:
    """Render the overlap matrix; colour scales linearly from 0 to the max cell.

    Truth segments (cycle_EX) run down the y axis, patterns (cycle_TS) along x.
    Each cell is one ``<rect>``; no other rectangles are emitted.
    """
    overlap = np.asarray(overlap)
    n_truth, n_pred = overlap.shape
    truth_ids = list(truth_ids) if truth_ids is not None else list(range(1, n_truth + 1))
    pred_ids = list(pred_ids) if pred_ids is not None else list(range(1, n_pred + 1))
    vmax = float(overlap.max()) if overlap.size else 0.0
    width = MARGIN + n_pred * CELL + 20
    height = MARGIN + n_truth * CELL + 20
    label_every = max(1, max(n_truth, n_pred) // 20)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="9">',
        f'<text x="{MARGIN + n_pred * CELL / 2:g}" y="14" text-anchor="middle" font-size="11">cycle_TS</text>',
        f'<text x="12" y="{MARGIN + n_truth * CELL / 2:g}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 12 {MARGIN + n_truth * CELL / 2:g})">cycle_EX</text>',
    ]
    for j, pid in enumerate(pred_ids):
        if j % label_every == 0:
            x = MARGIN + j * CELL + CELL / 2
            parts.append(f'<text x="{x:g}" y="{MARGIN - 6}" text-anchor="middle">{pid}</text>')
    for i, tid in enumerate(truth_ids):
        if i % label_every == 0:
            y = MARGIN + i * CELL + CELL * 0.7
            parts.append(f'<text x="{MARGIN - 4}" y="{y:g}" text-anchor="end">{tid}</text>')
    for i in range(n_truth):
        for j in range(n_pred):
            v = int(overlap[i, j])
            parts.append(
                f'<rect class="cell" x="{MARGIN + j * CELL}" y="{MARGIN + i * CELL}" '
                f'width="{CELL}" height="{CELL}" fill="{_color(v, vmax)}" stroke="#dddddd" '
                f'stroke-width="0.5"><title>EX {truth_ids[i]} / TS {pred_ids[j]}: {v}</title></rect>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def series_overlay_svg(values, patterns, title: str = "", width: int = 1200, height: int = 300,
                       max_points: int = 4000) -> str:
    """Line plot of a series with each pattern drawn in its own colour."""
    values = np.asarray(values, dtype=float)
    n = values.size
    pad = 30
    lo = float(values.min()) if n else 0.0
    hi = float(values.max()) if n else 1.0
    if hi <= lo:
        hi = lo + 1.0
    step = max(1, -(-n // max_points))

    def xy(i: int) -> str:
        x = pad + (width - 2 * pad) * (i / max(n - 1, 1))
        y = height - pad - (height - 2 * pad) * ((values[i] - lo) / (hi - lo))
        return f"{x:.1f},{y:.1f}"

    def polyline(a: int, b: int, color: str) -> str:
        idx = list(range(a, b + 1, step))
        if idx[-1] != b:
            idx.append(b)
        pts = " ".join(xy(i) for i in idx)
        return f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{pad}" y="16">{escape(title)}</text>',
    ]
    if n:
        parts.append(polyline(0, n - 1, "#bbbbbb"))
        for k, p in enumerate(patterns):
            parts.append(polyline(p.start, p.end, PALETTE[k % len(PALETTE)]))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
