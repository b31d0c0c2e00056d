"""Synthetic images of a rotating bar with MRI- or ultrasound-like corruption.

Random numbers
--------------
Every frame draws from its own Philox4x64-10 stream keyed by
``seed + (frame_index << 64)``, so output does not depend on the order in
which frames are generated. Uniform doubles come from numpy's 53-bit
conversion; Gaussian deviates use the Box-Muller transform (cosine branch
first, then sine branch) and Rayleigh deviates the Box-Muller radius.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import AngleTrace, Frame, ImageSequence

__all__ = [
    "BarGeometry",
    "NoisePreset",
    "NOISE_PRESETS",
    "GEOMETRIES",
    "default_geometry",
    "coverage",
    "render_frame",
    "render_sequence",
    "apply_noise",
    "frame_stream",
]

SUPERSAMPLE = 4
# Half-turn quantisation of the rendering angle; makes theta and theta + pi
# land on the same grid point so their frames are bit-identical.
_ANGLE_STEPS = 2**31


@dataclass(frozen=True)
class BarGeometry:
    length: float
    width: float
    image_extent: float
    resolution: int = 128
    foreground: float = 1.0
    background: float = 0.0

    def __post_init__(self):
        if not (0 < self.width <= self.length < self.image_extent):
            raise ValueError("need 0 < width <= length < image_extent")
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")
        if self.foreground == self.background:
            raise ValueError("foreground and background intensities must differ")

    @property
    def pixel_size(self):
        return self.image_extent / self.resolution


@dataclass(frozen=True)
class NoisePreset:
    kind: str = "none"
    blur_sigma: float = 0.0
    noise_level: float = 0.0
    speckle_grain: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "mri", "us"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.noise_level < 0 or self.blur_sigma < 0 or self.speckle_grain < 0:
            raise ValueError("noise parameters must be non-negative")


NOISE_PRESETS = {
    "none": NoisePreset("none"),
    "mri": NoisePreset("mri", blur_sigma=1.0, noise_level=0.05),
    "us": NoisePreset("us", noise_level=0.1, speckle_grain=1.5),
}


def default_geometry(length, width, resolution=128):
    """Bar that spans 0.55 of a square field of view."""
    return BarGeometry(length=length, width=width, image_extent=length / 0.55,
                       resolution=resolution)


# Foam block of the spring phantom and a 10 x 2 stud Lego Technic bar (8 mm pitch).
GEOMETRIES = {
    "3dp": default_geometry(0.11, 0.02),
    "lego": default_geometry(0.08, 0.016),
}


@functools.lru_cache(maxsize=8)
def _sample_grid(resolution, extent):
    # Sample positions symmetric about the image centre: pixel (r, c) maps to
    # (R-1-r, R-1-c) under a half turn, and so do the sub-samples.
    p = extent / resolution
    s = SUPERSAMPLE
    centers = (np.arange(resolution) + 0.5) * p - extent / 2
    offsets = ((np.arange(s) + 0.5) / s - 0.5) * p
    axis = (centers[:, None] + offsets[None, :]).ravel()
    # x runs along columns, y upward along rows
    return axis[None, :], -axis[:, None]


def _snap(angle):
    k = int(round(math.fmod(angle / math.pi, 1.0) * _ANGLE_STEPS)) % _ANGLE_STEPS
    return math.pi * k / _ANGLE_STEPS


def coverage(geom: BarGeometry, angle: float) -> np.ndarray:
    """Fraction of each pixel covered by the bar, from 4x4 supersampling."""
    a = _snap(angle)
    c, s = math.cos(a), math.sin(a)
    x, y = _sample_grid(geom.resolution, geom.image_extent)
    along = np.abs((x * c) + (y * s)) <= geom.length / 2
    across = np.abs((y * c) - (x * s)) <= geom.width / 2
    inside = along & across
    n = SUPERSAMPLE
    r = geom.resolution
    return inside.reshape(r, n, r, n).sum(axis=(1, 3)) / (n * n)


def render_frame(geom: BarGeometry, angle: float) -> Frame:
    cov = coverage(geom, angle)
    return Frame(geom.background + cov * (geom.foreground - geom.background))


def frame_stream(seed: int, index: int) -> np.random.Generator:
    """Independent random stream for one frame of one sequence."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must lie in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=seed + (index << 64)))


def _gaussian_pairs(rng, shape):
    n = int(np.prod(shape))
    u1 = 1.0 - rng.random(n)  # (0, 1]
    u2 = rng.random(n)
    r = np.sqrt(-2.0 * np.log(u1))
    return (r * np.cos(2 * np.pi * u2)).reshape(shape), (r * np.sin(2 * np.pi * u2)).reshape(shape)


def apply_noise(image: np.ndarray, noise: NoisePreset, foreground: float, rng) -> np.ndarray:
    """Corrupt one noiseless image. Output is finite and non-negative."""
    if noise.kind == "none":
        return image
    sigma = noise.noise_level * abs(foreground)
    if noise.blur_sigma > 0:
        image = ndimage.gaussian_filter(image, noise.blur_sigma, mode="nearest")
    if noise.kind == "mri":
        n1, n2 = _gaussian_pairs(rng, image.shape)
        return np.hypot(image + sigma * n1, sigma * n2)
    # ultrasound: low-pass filtered Rayleigh speckle, then additive noise
    u = 1.0 - rng.random(image.shape)
    speckle = np.sqrt(-2.0 * np.log(u)) * math.sqrt(2.0 / math.pi)  # unit mean
    if noise.speckle_grain > 0:
        speckle = ndimage.gaussian_filter(speckle, noise.speckle_grain, mode="wrap")
    additive, _ = _gaussian_pairs(rng, image.shape)
    return np.clip(image * speckle + sigma * additive, 0.0, None)


def render_sequence(trace: AngleTrace, geom: BarGeometry, noise: NoisePreset,
                    fps: float, seed: int = 0) -> ImageSequence:
    """Render ``trace`` at ``fps`` frames per second.

    Angles are linearly interpolated at the frame times. If the bar turns by
    more than a quarter turn between frames the sequence carries an
    ``aliasing_warning`` entry in ``meta``.
    """
    if not fps > 0:
        raise ValueError("fps must be positive")
    t_start, t_end = float(trace.times[0]), float(trace.times[-1])
    n = int(math.floor((t_end - t_start) * fps + 1e-9)) + 1
    if n < 2:
        raise ValueError("trace is shorter than two frame intervals")
    times = t_start + np.arange(n) / fps
    angles = np.interp(times, trace.times, trace.angles)
    frames = np.empty((n, geom.resolution, geom.resolution))
    for i, a in enumerate(angles):
        clean = render_frame(geom, a).values
        frames[i] = apply_noise(clean, noise, geom.foreground, frame_stream(seed, i))
    meta = {"seed": seed, "noise": noise.kind, "angles": angles}
    step = float(np.max(np.abs(np.diff(angles))))
    if step > math.pi / 2:
        msg = (f"bar turns up to {step:.3f} rad between frames (> pi/2); "
               f"{fps} fps under-samples the rotation")
        meta["aliasing_warning"] = msg
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return ImageSequence(frames, fps=fps, t0=t_start, meta=meta)
