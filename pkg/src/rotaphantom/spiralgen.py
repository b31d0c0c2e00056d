"""Mainspring profile: a spiral leaving the axle and growing to the outer radius.

Two forms are available. The default is the Archimedean spiral
``r(theta) = R0 + (R1 - R0) * theta / (2 pi N)``. ``as_written=True`` gives
the printed parametrisation
``x = R1 - (R0 - R1) * theta / (2 pi N) * cos(theta)`` (and ``sin`` for y),
which starts at ``(R1, R1)`` rather than on the axle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

__all__ = ["SpiralSpec", "spiral_polyline", "polyline_length", "archimedean_length",
           "export_svg", "points_csv"]


@dataclass(frozen=True)
class SpiralSpec:
    """Axle radius ``R0``, outer radius ``R1`` (m) and ``N`` turns at rest.

    ``R0 == R1`` is accepted and gives ``N`` turns of a circle.
    """

    R0: float
    R1: float
    N: float
    samples_per_turn: int = 256

    def __post_init__(self):
        if not (0 < self.R0 <= self.R1):
            raise ValueError("radii must satisfy 0 < R0 <= R1")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.samples_per_turn < 16:
            raise ValueError("samples_per_turn must be at least 16")

    @property
    def n_points(self):
        return int(round(self.N * self.samples_per_turn)) + 1


def spiral_polyline(spec: SpiralSpec, corrected: bool = True) -> np.ndarray:
    """``(n, 2)`` array of points in metres, theta uniform on ``[0, 2 pi N]``."""
    theta = np.linspace(0.0, 2 * np.pi * spec.N, spec.n_points)
    frac = theta / (2 * np.pi * spec.N)
    if corrected:
        r = spec.R0 + (spec.R1 - spec.R0) * frac
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    a = (spec.R0 - spec.R1) * frac
    return np.column_stack([spec.R1 - a * np.cos(theta), spec.R1 - a * np.sin(theta)])


def polyline_length(points) -> float:
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 2:
        raise ValueError("need at least 2 points")
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))


def archimedean_length(spec: SpiralSpec) -> float:
    """Closed-form arc length of the corrected spiral."""
    b = (spec.R1 - spec.R0) / (2 * np.pi * spec.N)
    if b == 0:
        return 2 * np.pi * spec.N * spec.R0

    def antider(r):
        s = math.hypot(r, b)
        return (r * s + b * b * math.log(r + s)) / (2 * b)

    return antider(spec.R1) - antider(spec.R0)


def export_svg(points, stroke_mm: float = 0.5) -> str:
    """Single-path SVG profile in millimetre units.

    The view box is the bounding box of the polyline grown by half a stroke.
    """
    p = np.asarray(points, dtype=np.float64) * 1000.0
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError("need a non-empty polyline")
    half = stroke_mm / 2
    x0, y0 = p.min(axis=0) - half
    x1, y1 = p.max(axis=0) + half
    w, h = x1 - x0, y1 - y0
    d = "M {:.6f} {:.6f}".format(*p[0])
    if p.shape[0] > 1:
        d += " L " + " ".join(f"{x:.6f} {y:.6f}" for x, y in p[1:])
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.6f}mm" height="{h:.6f}mm" '
        f'viewBox="{x0:.6f} {y0:.6f} {w:.6f} {h:.6f}">\n'
        f'  <path d={quoteattr(d)} fill="none" stroke="black" '
        f'stroke-width="{stroke_mm:.6f}" stroke-linecap="round" stroke-linejoin="round"/>\n'
        "</svg>\n"
    )


def points_csv(points) -> str:
    rows = ["x_m,y_m"] + [f"{float(x)!r},{float(y)!r}" for x, y in np.asarray(points)]
    return "\n".join(rows) + "\n"
