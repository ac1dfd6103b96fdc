"""Minimal self-contained SVG figures for the benchmark reports.

No plotting dependency: files are plain XML with absolute coordinates, one
``<g class="panel">`` group per panel, and no external references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

MARGIN = 46.0
PANEL_W = 320.0
PANEL_H = 320.0

BLUE = "#1f77b4"
RED = "#d62728"
ORANGE = "#ff7f0e"
GRAY = "#777777"
GREEN = "#2ca02c"


def _document(width: float, height: float, body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


class _Axis:
    """Linear data-to-pixel map for one panel."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        a, b = self.xlim
        span = (b - a) or 1.0
        return self.x0 + (x - a) / span * self.w

    def py(self, y):
        a, b = self.ylim
        span = (b - a) or 1.0
        return self.y0 + self.h - (y - a) / span * self.h

    def frame(self, title: str) -> list[str]:
        parts = [
            f'<rect x="{self.x0:.1f}" y="{self.y0:.1f}" width="{self.w:.1f}" '
            f'height="{self.h:.1f}" fill="none" stroke="#222" stroke-width="1"/>',
            f'<text x="{self.x0 + self.w / 2:.1f}" y="{self.y0 - 10:.1f}" '
            f'text-anchor="middle" font-size="13" font-family="sans-serif">{escape(title)}</text>',
        ]
        for lim, fmt in ((self.xlim, "x"), (self.ylim, "y")):
            lo, hi = lim
            if fmt == "x":
                parts.append(
                    f'<text x="{self.x0:.1f}" y="{self.y0 + self.h + 16:.1f}" font-size="10" '
                    f'font-family="sans-serif">{lo:.3g}</text>'
                )
                parts.append(
                    f'<text x="{self.x0 + self.w:.1f}" y="{self.y0 + self.h + 16:.1f}" '
                    f'text-anchor="end" font-size="10" font-family="sans-serif">{hi:.3g}</text>'
                )
            else:
                parts.append(
                    f'<text x="{self.x0 - 4:.1f}" y="{self.y0 + self.h:.1f}" text-anchor="end" '
                    f'font-size="10" font-family="sans-serif">{lo:.3g}</text>'
                )
                parts.append(
                    f'<text x="{self.x0 - 4:.1f}" y="{self.y0 + 10:.1f}" text-anchor="end" '
                    f'font-size="10" font-family="sans-serif">{hi:.3g}</text>'
                )
        return parts


@dataclass
class ScatterPanel:
    title: str
    points: np.ndarray  # (n, 2)
    colors: Sequence[str]  # one per point


def scatter_panels(panels: Sequence[ScatterPanel], path, radius: float = 1.4) -> None:
    """Side-by-side scatter panels on shared axes (one circle per point)."""
    all_pts = np.vstack([p.points for p in panels])
    xlim = (float(all_pts[:, 0].min()), float(all_pts[:, 0].max()))
    ylim = (float(all_pts[:, 1].min()), float(all_pts[:, 1].max()))
    width = MARGIN + len(panels) * (PANEL_W + MARGIN)
    height = PANEL_H + 2 * MARGIN
    body = []
    for k, panel in enumerate(panels):
        ax = _Axis(MARGIN + k * (PANEL_W + MARGIN), MARGIN, PANEL_W, PANEL_H, xlim, ylim)
        circles = [
            f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="{radius}" '
            f'fill="{c}" fill-opacity="0.55"/>'
            for (x, y), c in zip(panel.points, panel.colors)
        ]
        body.append(f'<g class="panel" id="panel-{k}">')
        body.extend(ax.frame(panel.title))
        body.extend(circles)
        body.append("</g>")
    with open(path, "w") as fh:
        fh.write(_document(width, height, body))


def strip_plot(
    groups: Sequence[tuple[str, np.ndarray]],
    path,
    vlines: Sequence[tuple[float, str, str]] = (),
    title: str = "",
) -> None:
    """One horizontal strip of points per named group, with reference lines."""
    vals = np.concatenate([np.asarray(v, dtype=float) for _, v in groups])
    marks = [v for v, _, _ in vlines]
    lo = min(float(vals.min()), *marks) if marks else float(vals.min())
    hi = max(float(vals.max()), *marks) if marks else float(vals.max())
    pad = 0.06 * (hi - lo or 1.0)
    xlim = (lo - pad, hi + pad)
    row_h = 34.0
    h = row_h * len(groups)
    width = 2 * MARGIN + 520.0
    height = h + 2 * MARGIN + 20
    ax = _Axis(MARGIN + 90, MARGIN, 520.0 - 90, h, xlim, (0.0, float(len(groups))))
    body = ['<g class="panel" id="panel-0">']
    body.extend(ax.frame(title))
    for gi, (name, ests) in enumerate(groups):
        cy = ax.py(len(groups) - gi - 0.5)
        body.append(
            f'<text x="{ax.x0 - 8:.1f}" y="{cy + 4:.1f}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{escape(name)}</text>'
        )
        for e in np.asarray(ests, dtype=float):
            body.append(
                f'<circle cx="{ax.px(e):.2f}" cy="{cy:.2f}" r="3" fill="{GRAY}" fill-opacity="0.6"/>'
            )
    for value, color, label in vlines:
        x = ax.px(value)
        body.append(
            f'<line x1="{x:.2f}" y1="{ax.y0:.1f}" x2="{x:.2f}" y2="{ax.y0 + ax.h:.1f}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        body.append(
            f'<text x="{x:.2f}" y="{ax.y0 + ax.h + 16:.1f}" text-anchor="middle" font-size="10" '
            f'fill="{color}" font-family="sans-serif">{escape(label)}</text>'
        )
    body.append("</g>")
    with open(path, "w") as fh:
        fh.write(_document(width, height, body))


def interval_panels(
    by_method: Sequence[tuple[str, Sequence[tuple[float, float, bool]]]],
    true_value: float,
    path,
) -> None:
    """One panel per method; each replication is a vertical interval segment,
    colored by whether it covers the dashed true-value line."""
    lo = min((s[0] for _, segs in by_method for s in segs), default=0.0)
    hi = max((s[1] for _, segs in by_method for s in segs), default=1.0)
    lo = min(lo, true_value)
    hi = max(hi, true_value)
    pad = 0.08 * (hi - lo or 1.0)
    ylim = (lo - pad, hi + pad)
    width = MARGIN + len(by_method) * (PANEL_W + MARGIN)
    height = PANEL_H + 2 * MARGIN
    body = []
    for k, (name, segs) in enumerate(by_method):
        n = max(len(segs), 1)
        ax = _Axis(MARGIN + k * (PANEL_W + MARGIN), MARGIN, PANEL_W, PANEL_H, (0.0, float(n + 1)), ylim)
        body.append(f'<g class="panel" id="panel-{k}">')
        body.extend(ax.frame(name))
        for bi, (lo_b, hi_b, covered) in enumerate(segs):
            x = ax.px(bi + 1)
            color = GREEN if covered else RED
            body.append(
                f'<line x1="{x:.2f}" y1="{ax.py(lo_b):.2f}" x2="{x:.2f}" y2="{ax.py(hi_b):.2f}" '
                f'stroke="{color}" stroke-width="1.4"/>'
            )
        y = ax.py(true_value)
        body.append(
            f'<line x1="{ax.x0:.1f}" y1="{y:.2f}" x2="{ax.x0 + ax.w:.1f}" y2="{y:.2f}" '
            f'stroke="#000" stroke-width="1.2" stroke-dasharray="6,4"/>'
        )
        body.append("</g>")
    with open(path, "w") as fh:
        fh.write(_document(width, height, body))
