"""Minimal standalone SVG charts for diagnostics."""
from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

W, H, PAD = 640, 420, 60


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return (a + b) / 2
    return a + (v - lo) * (b - a) / (hi - lo)


def _frame(title, xlabel, ylabel, xlim, ylim):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
        f'<text x="18" y="{H / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {H / 2})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(*xlim, 5):
        x = _scale(v, *xlim, PAD, W - PAD)
        out.append(f'<text x="{x:.1f}" y="{H - PAD + 16}" text-anchor="middle" font-size="11">{v:.3g}</text>')
    for v in np.linspace(*ylim, 5):
        y = _scale(v, *ylim, H - PAD, PAD)
        out.append(f'<text x="{PAD - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{v:.3g}</text>')
    return out


def curve_svg(path, points, best, title="", xlabel="K", ylabel="criterion"):
    """Scatter of (K, value) for every evaluated combination plus the per-K best line."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    xs, ys = pts[:, 0], pts[:, 1]
    xlim = (float(xs.min()) - 0.5, float(xs.max()) + 0.5)
    span = float(ys.max() - ys.min()) or 1.0
    ylim = (float(ys.min()) - 0.05 * span, float(ys.max()) + 0.05 * span)
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    for x, y in pts:
        out.append(f'<circle cx="{_scale(x, *xlim, PAD, W - PAD):.1f}" '
                   f'cy="{_scale(y, *ylim, H - PAD, PAD):.1f}" r="3" fill="steelblue" opacity="0.6"/>')
    line = " ".join(f"{_scale(x, *xlim, PAD, W - PAD):.1f},{_scale(y, *ylim, H - PAD, PAD):.1f}"
                    for x, y in sorted(best))
    out.append(f'<polyline points="{line}" fill="none" stroke="crimson" stroke-width="2"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def heatmap_svg(path, p1, p2, values, title="", cell=None):
    """Square cells colored by sign and magnitude; blue where values > 0."""
    p1, p2, values = (np.asarray(a, dtype=float) for a in (p1, p2, values))
    if cell is None:
        u = np.unique(p1)
        cell = float(np.min(np.diff(u))) if u.size > 1 else 0.05
    xlim = (float(p1.min()) - cell / 2, float(p1.max()) + cell / 2)
    ylim = (float(p2.min()) - cell / 2, float(p2.max()) + cell / 2)
    out = _frame(title, "p1", "p2", xlim, ylim)
    vmax = float(np.max(np.abs(values))) or 1.0
    cw = (W - 2 * PAD) * cell / (xlim[1] - xlim[0])
    ch = (H - 2 * PAD) * cell / (ylim[1] - ylim[0])
    for a, b, v in zip(p1, p2, values):
        t = min(1.0, abs(v) / vmax) ** 0.5
        shade = int(235 - 170 * t)
        color = f"rgb({shade},{shade},255)" if v > 0 else f"rgb(255,{shade},{int(shade * 0.6)})"
        x = _scale(a, *xlim, PAD, W - PAD) - cw / 2
        y = _scale(b, *ylim, H - PAD, PAD) - ch / 2
        out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw + 0.5:.1f}" height="{ch + 0.5:.1f}" '
                   f'fill="{color}"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
