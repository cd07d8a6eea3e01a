"""Minimal static SVG charts (line plots and categorical grids)."""

from __future__ import annotations

import math
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#17becf", "#bcbd22")
DASHES = ("", "6,3", "2,3", "8,3,2,3")

W, H = 760, 480
ML, MR, MT, MB = 80, 200, 50, 60


def _nice_ticks(lo, hi, n=6):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _log_ticks(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return [10.0**k for k in range(a, b + 1) if lo * (1 - 1e-9) <= 10.0**k <= hi * (1 + 1e-9)] or [lo, hi]


def _fmt(v):
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-2:
        return f"{v:.0e}".replace("e+0", "e").replace("e-0", "e-")
    return f"{v:g}"


def _header(title, config_hash):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        f'font-family="Helvetica, Arial, sans-serif" font-size="12">',
        f"<!-- config-hash: {config_hash} -->",
        f'<metadata>config-hash: {config_hash}</metadata>',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{W - 6}" y="{H - 6}" text-anchor="end" font-size="9" fill="#888">config {config_hash}</text>',
    ]


def line_chart(path, title, x, series: dict, xlabel, ylabel, config_hash, xlog=False, ylog=False):
    """series: label -> y array (NaN/inf points are skipped)."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v) & ((v > 0) if ylog else True)] for v in ys.values()] or [np.zeros(1)])
    xf = x[np.isfinite(x)]
    x0, x1 = (float(xf.min()), float(xf.max())) if xf.size else (0.0, 1.0)
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 <= y0:
        y0, y1 = (y0 * 0.5, y0 * 1.5) if ylog else (y0 - 1.0, y1 + 1.0)
    if x1 <= x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if not ylog:
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - ML - MR, H - MT - MB

    def tx(v):
        if xlog:
            return ML + pw * (math.log10(v) - math.log10(x0)) / (math.log10(x1) - math.log10(x0))
        return ML + pw * (v - x0) / (x1 - x0)

    def ty(v):
        if ylog:
            return MT + ph * (1 - (math.log10(v) - math.log10(y0)) / (math.log10(y1) - math.log10(y0)))
        return MT + ph * (1 - (v - y0) / (y1 - y0))

    out = _header(title, config_hash)
    out.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for t in (_log_ticks(x0, x1) if xlog else _nice_ticks(x0, x1)):
        X = tx(t)
        out.append(f'<line x1="{X:.2f}" y1="{MT}" x2="{X:.2f}" y2="{MT + ph}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{X:.2f}" y="{MT + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in (_log_ticks(y0, y1) if ylog else _nice_ticks(y0, y1)):
        Y = ty(t)
        out.append(f'<line x1="{ML}" y1="{Y:.2f}" x2="{ML + pw}" y2="{Y:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{ML - 6}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{MT + ph / 2}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>')
    for i, (label, y) in enumerate(ys.items()):
        color = PALETTE[i % len(PALETTE)]
        dash = DASHES[(i // len(PALETTE)) % len(DASHES)]
        ok = np.isfinite(y) & np.isfinite(x) & ((y > 0) if ylog else True)
        pts = " ".join(f"{tx(a):.2f},{ty(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            da = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8"{da} points="{pts}"/>')
        ly = MT + 14 + 18 * i
        out.append(f'<line x1="{W - MR + 12}" y1="{ly - 4}" x2="{W - MR + 36}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"{f" stroke-dasharray={chr(34)}{dash}{chr(34)}" if dash else ""}/>')
        out.append(f'<text x="{W - MR + 42}" y="{ly}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


CLASS_COLORS = {"fail": "#d9d9d9", "comm-only": "#fdae6b", "sense-only": "#9ecae1", "feasible": "#3182bd"}


def category_grid(path, title, xs, ys, classes, xlabel, ylabel, config_hash):
    """classes[i][j] is the class at (xs[j], ys[i])."""
    pw, ph = W - ML - MR, H - MT - MB
    nx, ny = len(xs), len(ys)
    cw, chh = pw / nx, ph / ny
    out = _header(title, config_hash)
    for i in range(ny):
        for j in range(nx):
            c = CLASS_COLORS.get(classes[i][j], "#ffffff")
            out.append(f'<rect x="{ML + j * cw:.2f}" y="{MT + (ny - 1 - i) * chh:.2f}" width="{cw + 0.3:.2f}" '
                       f'height="{chh + 0.3:.2f}" fill="{c}"/>')
    out.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for j in range(0, nx, max(1, nx // 8)):
        out.append(f'<text x="{ML + (j + 0.5) * cw:.2f}" y="{MT + ph + 16}" text-anchor="middle">{_fmt(xs[j])}</text>')
    for i in range(0, ny, max(1, ny // 8)):
        out.append(f'<text x="{ML - 6}" y="{MT + (ny - 0.5 - i) * chh + 4:.2f}" text-anchor="end">{_fmt(ys[i])}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{MT + ph / 2}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>')
    for k, (name, color) in enumerate(CLASS_COLORS.items()):
        ly = MT + 14 + 20 * k
        out.append(f'<rect x="{W - MR + 12}" y="{ly - 10}" width="14" height="12" fill="{color}" stroke="#555"/>')
        out.append(f'<text x="{W - MR + 32}" y="{ly}" font-size="11">{name}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
