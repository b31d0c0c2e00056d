"""Dependency-free SVG line plots for pipeline outputs."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _panel(series, x0, y0, width, height, title, xlabel, ylabel):
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def px(x):
        return x0 + (x - xmin) / (xmax - xmin) * width

    def py(y):
        return y0 + height - (y - ymin) / (ymax - ymin) * height

    out = [f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{width:.2f}" height="{height:.2f}" '
           f'fill="none" stroke="#444" stroke-width="1"/>',
           f'<text x="{x0 + width / 2:.2f}" y="{y0 - 8:.2f}" text-anchor="middle" '
           f'font-size="14">{escape(title)}</text>',
           f'<text x="{x0 + width / 2:.2f}" y="{y0 + height + 32:.2f}" text-anchor="middle" '
           f'font-size="12">{escape(xlabel)}</text>',
           f'<text x="{x0 - 45:.2f}" y="{y0 + height / 2:.2f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 {x0 - 45:.2f} {y0 + height / 2:.2f})">{escape(ylabel)}</text>']
    for value, anchor_x in ((xmin, x0), (xmax, x0 + width)):
        out.append(f'<text x="{anchor_x:.2f}" y="{y0 + height + 15:.2f}" text-anchor="middle" '
                   f'font-size="10">{value:.3g}</text>')
    for value in (ymin, ymax):
        out.append(f'<text x="{x0 - 5:.2f}" y="{py(value) + 4:.2f}" text-anchor="end" '
                   f'font-size="10">{value:.3g}</text>')
    for i, (x, y, label) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " L ".join(f"{px(a):.2f} {py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<path d="M {pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        if label:
            out.append(f'<text x="{x0 + width - 5:.2f}" y="{y0 + 15 + 14 * i:.2f}" '
                       f'text-anchor="end" font-size="11" fill="{color}">{escape(label)}</text>')
    return out


def analysis_svg(embedding, velocity, truth=None) -> str:
    """Two stacked panels: the 1D embedding and the recovered rotation rate."""
    width, height = 720, 560
    body = _panel([(embedding.times, embedding.coords, "")], 70, 40, 620, 190,
                  "Laplacian eigenmap coordinate", "time (s)", "coordinate")
    series = [(velocity.times, velocity.velocities, "recovered")]
    if truth is not None:
        series.append((truth.times, truth.velocities, "ground truth"))
    body += _panel(series, 70, 310, 620, 190, "Rotation rate", "time (s)", "velocity (Hz)")
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            '<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")
