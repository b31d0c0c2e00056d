"""Shared value types and file formats.

Units used across the package: seconds for time, radians for angles
(unwrapped), rotations per second (Hz) for angular velocity.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Frame",
    "ImageSequence",
    "AngleTrace",
    "VelocityTrace",
    "FormatError",
    "TruncatedError",
    "NonFiniteError",
    "TraceParseError",
    "write_sequence",
    "read_sequence",
    "write_trace",
    "read_trace",
    "write_pgm",
]

MPSQ_MAGIC = b"MPSQ"
MPSQ_VERSION = 1
_MPSQ_HEADER = struct.Struct("<4sIIIIdd")
TRACE_HEADER = "time_s,velocity_hz"


class FormatError(ValueError):
    """File does not follow the expected container layout."""


class TruncatedError(FormatError):
    """File ends before the declared payload."""


class NonFiniteError(ValueError):
    """NaN or Inf where only finite numbers are allowed."""


class TraceParseError(ValueError):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _frozen(a, dtype=np.float64, name="array"):
    a = np.array(a, dtype=dtype, copy=True)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Frame:
    """One 2D intensity image, stored as a (height, width) float64 array."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, name="frame values")
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"frame must be a non-empty 2D array, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class ImageSequence:
    """Uniformly sampled stack of frames.

    ``frames`` has shape ``(n_frames, height, width)``. Intensities are
    rounded to float32 on construction (the on-disk precision) and held as
    float64, so a write/read round trip is bit-exact. ``meta`` carries
    free-form annotations (e.g. aliasing warnings from the renderer) and is
    not written to disk.
    """

    frames: np.ndarray
    fps: float
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if not np.all(np.isfinite(f)):
            raise NonFiniteError("frames contain non-finite values")
        f = _frozen(f.astype(np.float32), name="frames")
        if f.ndim != 3:
            raise ValueError(f"frames must have shape (n, height, width), got {f.shape}")
        if f.shape[0] < 2:
            raise ValueError("a sequence needs at least 2 frames")
        if f.shape[1] == 0 or f.shape[2] == 0:
            raise ValueError("frames must be non-empty")
        if not math.isfinite(self.fps) or self.fps <= 0:
            raise ValueError(f"fps must be positive and finite, got {self.fps}")
        if not math.isfinite(self.t0):
            raise NonFiniteError("t0 must be finite")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self):
        return self.frames.shape[0]

    def __getitem__(self, i):
        return Frame(self.frames[i])

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def times(self):
        return self.t0 + np.arange(len(self)) / self.fps


def _check_times(times):
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")


@dataclass(frozen=True, eq=False)
class AngleTrace:
    """Unwrapped rotation angle (radians) over time (seconds)."""

    times: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times, name="times")
        a = _frozen(self.angles, name="angles")
        _check_times(t)
        if t.shape != a.shape:
            raise ValueError("times and angles must have the same length")
        if t.size < 2:
            raise ValueError("an angle trace needs at least 2 samples")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "angles", a)

    def __len__(self):
        return self.times.size

    def wrapped(self):
        """Angles folded into [0, 2*pi)."""
        return np.mod(self.angles, 2 * np.pi)


@dataclass(frozen=True, eq=False)
class VelocityTrace:
    """Angular velocity in rotations per second (Hz) over time (seconds)."""

    times: np.ndarray
    velocities: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = _frozen(self.times, name="times")
        v = _frozen(self.velocities, name="velocities")
        _check_times(t)
        if t.shape != v.shape:
            raise ValueError("times and velocities must have the same length")
        if np.any(v < 0):
            raise ValueError("velocities must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "velocities", v)

    def __len__(self):
        return self.times.size

    @property
    def span(self):
        return float(self.times[0]), float(self.times[-1])


def write_sequence(seq: ImageSequence, path) -> None:
    n, h, w = seq.frames.shape
    header = _MPSQ_HEADER.pack(MPSQ_MAGIC, MPSQ_VERSION, w, h, n, seq.fps, seq.t0)
    payload = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write sequence to {os.fspath(path)}: {exc.strerror}") from exc


def read_sequence(path) -> ImageSequence:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read sequence from {os.fspath(path)}: {exc.strerror}") from exc
    if len(data) < 4 or data[:4] != MPSQ_MAGIC:
        raise FormatError(f"{os.fspath(path)}: bad magic, not an MPSQ file")
    if len(data) < _MPSQ_HEADER.size:
        raise TruncatedError(f"{os.fspath(path)}: header truncated")
    _, version, w, h, n, fps, t0 = _MPSQ_HEADER.unpack_from(data)
    if version != MPSQ_VERSION:
        raise FormatError(f"{os.fspath(path)}: unsupported MPSQ version {version}")
    expected = n * h * w * 4
    payload = data[_MPSQ_HEADER.size:]
    if len(payload) < expected:
        raise TruncatedError(
            f"{os.fspath(path)}: payload has {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise FormatError(f"{os.fspath(path)}: {len(payload) - expected} trailing bytes")
    frames = np.frombuffer(payload, dtype="<f4").reshape(n, h, w)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteError(f"{os.fspath(path)}: payload contains non-finite values")
    return ImageSequence(frames.astype(np.float64), fps=fps, t0=t0)


def write_trace(trace: VelocityTrace, path) -> None:
    lines = [TRACE_HEADER]
    lines += [f"{float(t)!r},{float(v)!r}" for t, v in zip(trace.times, trace.velocities)]
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {os.fspath(path)}: {exc.strerror}") from exc


def read_trace(path) -> VelocityTrace:
    try:
        with open(path, newline="") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise OSError(f"cannot read trace from {os.fspath(path)}: {exc.strerror}") from exc
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceParseError(path, 1, f"expected header {TRACE_HEADER!r}")
    times, vels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != 2:
            raise TraceParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceParseError(path, lineno, f"not a number: {line!r}") from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise TraceParseError(path, lineno, "non-finite value")
        times.append(t)
        vels.append(v)
    try:
        return VelocityTrace(np.array(times), np.array(vels))
    except ValueError as exc:
        raise TraceParseError(path, len(lines), str(exc)) from None


def write_pgm(frame: Frame, path) -> None:
    """Write a frame as a 16-bit binary PGM, scaled so the maximum maps to 65535."""
    v = frame.values
    peak = float(v.max())
    scaled = np.zeros(v.shape) if peak <= 0 else np.clip(v, 0, None) / peak * 65535
    raw = np.rint(scaled).astype(">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.width} {frame.height}\n65535\n".encode("ascii"))
        fh.write(raw)
