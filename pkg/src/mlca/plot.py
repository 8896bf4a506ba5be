"""Grouped bar chart of response probabilities as a standalone SVG.

One group of bars per item, one bar per class. Binary items show the
probability of their second (sorted) category; polytomous items show the
probability of their highest category.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .report import unmat

WIDTH, HEIGHT = 960, 640
# qualitative palette, indexed by class and cycled past eight classes
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def plotted_probabilities(phi) -> np.ndarray:
    """``H x T`` matrix of the plotted probability per item and class."""
    return np.array([np.asarray(p)[:, -1] for p in phi])


def profile_svg(phi, item_names, clab=None, horiz=True, title="Response probabilities") -> str:
    probs = plotted_probabilities(phi)
    H, T = probs.shape
    if len(item_names) != H:
        raise ValueError("one name per item is required")
    if clab is None:
        clab = [f"C{t + 1}" for t in range(T)]
    clab = list(clab)
    if len(clab) != T:
        raise ValueError(f"clab has {len(clab)} labels but the model has {T} classes")

    left, right, top = 70, 30, 60
    bottom = 90 if horiz else 170
    legend_w = 150
    plot_w = WIDTH - left - right - legend_w
    plot_h = HEIGHT - top - bottom
    slot = plot_w / H
    bar_w = slot * 0.8 / T

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="30" text-anchor="middle" font-family="sans-serif" font-size="18">{escape(title)}</text>',
    ]
    for k in range(6):
        v = k / 5
        y = top + plot_h * (1 - v)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w:.2f}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="12">{v:.1f}</text>'
        )
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w:.2f}" y2="{top + plot_h}" stroke="black"/>')

    for h in range(H):
        x0 = left + h * slot + slot * 0.1
        for t in range(T):
            v = float(np.clip(probs[h, t], 0.0, 1.0))
            bh = plot_h * v
            out.append(
                f'<rect class="bar" data-item="{escape(item_names[h])}" data-class="{t + 1}" '
                f'x="{x0 + t * bar_w:.2f}" y="{top + plot_h - bh:.2f}" width="{bar_w:.2f}" height="{bh:.2f}" '
                f'fill="{PALETTE[t % len(PALETTE)]}"><title>{escape(item_names[h])} {escape(clab[t])}: {v:.4f}</title></rect>'
            )
        cx = left + (h + 0.5) * slot
        cy = top + plot_h + 18
        label = escape(item_names[h])
        if horiz:
            out.append(f'<text x="{cx:.2f}" y="{cy:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12">{label}</text>')
        else:
            out.append(
                f'<text x="{cx:.2f}" y="{cy - 8:.2f}" text-anchor="end" font-family="sans-serif" font-size="12" '
                f'transform="rotate(-90 {cx:.2f} {cy - 8:.2f})">{label}</text>'
            )

    lx = left + plot_w + 20
    for t in range(T):
        ly = top + 10 + 24 * t
        out.append(f'<rect class="legend" x="{lx}" y="{ly}" width="14" height="14" fill="{PALETTE[t % len(PALETTE)]}"/>')
        out.append(f'<text x="{lx + 20}" y="{ly + 12}" font-family="sans-serif" font-size="13">{escape(clab[t])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_from_document(doc, clab=None, horiz=True) -> str:
    """Render the chart from a stored fit document."""
    phi = [unmat(m) for m in doc["response_probabilities"]]
    names = [it["name"] for it in doc["data"]["items"]]
    return profile_svg(phi, names, clab, horiz)
