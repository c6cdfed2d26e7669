"""Minimal SVG output for curve bands (no plotting dependency)."""

from __future__ import annotations

from html import escape

import numpy as np

W, H = 420, 360
LEFT, RIGHT, TOP, BOTTOM = 56, 110, 30, 46


def _shade(level, n):
    # darker for smaller B so the tightest band sits on top
    frac = 0.25 + 0.6 * (1 - level / max(n - 1, 1)) if n > 1 else 0.6
    return f"rgb({int(255 - 200 * frac)},{int(255 - 120 * frac)},{int(255 - 30 * frac)})"


def _segments(pts, gap):
    """Split a polyline at gaps and drop non-finite coordinates."""
    seg, out = [], []
    for p, g in zip(pts, gap):
        if g or not np.all(np.isfinite(p)):
            if seg:
                out.append(seg)
            seg = []
        else:
            seg.append(p)
    if seg:
        out.append(seg)
    return out


def bands_svg(bands, title="", xlabel=None, ylabel=None, xlim=None, ylim=None) -> str:
    """Render bands for several B values on one set of axes.

    Bands are drawn from the largest B to the smallest, each as a shaded
    polygon between its upper and lower curves, with a legend keyed on B.
    """
    bands = sorted(bands, key=lambda b: -b.B)
    if not bands:
        raise ValueError("nothing to plot")
    kind = bands[0].kind
    roc = kind in ("ROC", "xROC")
    if xlim is None:
        if roc:
            xlim = (0.0, 1.0)
        else:
            xs = np.concatenate([b.thresholds[np.isfinite(b.thresholds)] for b in bands])
            xlim = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
            if xlim[0] == xlim[1]:
                xlim = (xlim[0] - 0.5, xlim[1] + 0.5)
    if ylim is None:
        ylim = (0.0, 1.0) if roc else (-1.0, 1.0)
    xlabel = xlabel or ("false positive rate" if roc else "threshold")
    ylabel = ylabel or ("true positive rate" if roc else f"{kind.split('_')[0]} disparity")
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlim[0]) / (xlim[1] - xlim[0]) * pw

    def sy(y):
        return TOP + (1 - (y - ylim[0]) / (ylim[1] - ylim[0])) * ph

    def path(seq):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in seq)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>']
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    for i, b in enumerate(bands):
        color = _shade(i, len(bands))
        lo_segs = _segments(b.lower, b.gap)
        up_segs = _segments(b.upper, b.gap)
        for lo, up in zip(lo_segs, up_segs):
            poly = path(up) + " " + path(lo[::-1])
            out.append(f'<polygon points="{poly}" fill="{color}" stroke="none" '
                       f'data-B="{b.B!r}"/>')
        for seg in up_segs + lo_segs:
            out.append(f'<polyline points="{path(seg)}" fill="none" stroke="#1f3b73" '
                       f'stroke-width="0.8"/>')
        ly = TOP + 14 * i
        out.append(f'<rect x="{W - RIGHT + 12}" y="{ly}" width="12" height="10" fill="{color}"/>')
        out.append(f'<text x="{W - RIGHT + 28}" y="{ly + 9}">B = {b.B:g}</text>')
    if roc:
        out.append(f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(1):.2f}" '
                   'stroke="#999" stroke-dasharray="4 3"/>')
    elif ylim[0] < 0 < ylim[1]:
        out.append(f'<line x1="{sx(xlim[0]):.2f}" y1="{sy(0):.2f}" x2="{sx(xlim[1]):.2f}" '
                   f'y2="{sy(0):.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for frac in np.linspace(0, 1, 6):
        xv = xlim[0] + frac * (xlim[1] - xlim[0])
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        out.append(f'<text x="{sx(xv):.2f}" y="{TOP + ph + 14}" text-anchor="middle">{xv:.2g}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{sy(yv) + 4:.2f}" text-anchor="end">{yv:.2g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(14,{TOP + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(bands, path, **kwargs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(bands_svg(bands, **kwargs))
