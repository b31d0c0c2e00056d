"""Spectrogram of the embedding, ridge extraction and rotation-rate recovery.

A bar looks the same after half a turn, so the embedding completes one
oscillation per half rotation: the ridge frequency is twice the rotation
rate and is halved back in :func:`to_velocity`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal.windows import hann

from .core import ImageSequence, VelocityTrace
from .embedding import DEFAULT_TARGET_SIDE, Embedding1D, embed_sequence

__all__ = [
    "Spectrogram",
    "RidgePoints",
    "RidgeCurve",
    "AnalysisConfig",
    "AnalysisResult",
    "StageError",
    "SpectrogramError",
    "SplineFitError",
    "windowed_segments",
    "stft_spectrogram",
    "extract_ridge",
    "ridge_count",
    "bspline_basis",
    "fit_ridge_spline",
    "to_velocity",
    "analyze",
    "analyze_detailed",
    "write_spectrogram",
]

RIDGE_PERCENT = 5
DEFAULT_F_MIN = 0.25


class SpectrogramError(ValueError):
    pass


class SplineFitError(ValueError):
    pass


class StageError(RuntimeError):
    """Failure inside one pipeline stage; ``stage`` names it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass(frozen=True, eq=False)
class Spectrogram:
    times: np.ndarray
    freqs: np.ndarray
    power: np.ndarray
    fs: float
    nfft: int
    window_samples: int

    @property
    def bin_width(self):
        return self.fs / self.nfft

    @property
    def nyquist(self):
        return self.fs / 2


def windowed_segments(embedding: Embedding1D, window_s: float, hop_s: float):
    """Mean-removed, Hann-weighted analysis segments of the embedding.

    Returns ``(centers, segments)`` with one row of ``segments`` per window.
    """
    fs = embedding.fs
    n_win = int(round(window_s * fs))
    hop = int(round(hop_s * fs))
    n = len(embedding)
    if hop < 1:
        raise SpectrogramError(f"hop of {hop_s} s is shorter than one sample")
    if n_win < 2 or n < n_win:
        raise SpectrogramError(
            f"embedding spans {n} samples, shorter than one {window_s} s window ({n_win} samples)")
    starts = np.arange(0, n - n_win + 1, hop)
    idx = starts[:, None] + np.arange(n_win)[None, :]
    seg = embedding.coords[idx]
    seg = seg - seg.mean(axis=1, keepdims=True)
    seg = seg * hann(n_win, sym=False)[None, :]
    centers = embedding.times[0] + window_s / 2 + np.arange(starts.size) * hop_s
    return centers, seg


def stft_spectrogram(embedding: Embedding1D, window_s: float = 8.0, hop_s: float = 1.0,
                     pad_factor: int = 4, f_min: float = DEFAULT_F_MIN) -> Spectrogram:
    """Power of the short-time Fourier transform of the embedding.

    Parameters
    ----------
    embedding : Embedding1D
        Uniformly sampled coordinate.
    window_s : float
        Window length, s. Must be at least ``2 / f_min`` so the slowest
        oscillation of interest fits twice into a window.
    hop_s : float
        Window step, s, at most ``window_s``.
    pad_factor : int
        FFT length as a multiple of the window length.
    f_min : float
        Lowest frequency the analysis must resolve, Hz.
    """
    if f_min <= 0:
        raise SpectrogramError("f_min must be positive")
    if window_s < 2.0 / f_min - 1e-9:
        raise SpectrogramError(
            f"window of {window_s} s is below 2/f_min = {2.0 / f_min:g} s")
    if not 0 < hop_s <= window_s:
        raise SpectrogramError("hop_s must lie in (0, window_s]")
    if pad_factor < 1 or int(pad_factor) != pad_factor:
        raise SpectrogramError("pad_factor must be a positive integer")
    centers, seg = windowed_segments(embedding, window_s, hop_s)
    n_win = seg.shape[1]
    nfft = int(pad_factor) * n_win
    spectrum = np.fft.rfft(seg, n=nfft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    fs = embedding.fs
    return Spectrogram(times=centers, freqs=np.fft.rfftfreq(nfft, d=1.0 / fs), power=power,
                       fs=fs, nfft=nfft, window_samples=n_win)


@dataclass(frozen=True, eq=False)
class RidgePoints:
    times: np.ndarray
    freqs: np.ndarray
    weights: np.ndarray
    per_column: int

    def __len__(self):
        return self.times.size


def ridge_count(n_bins):
    """ceil(5% of n_bins), in integer arithmetic."""
    return -(-RIDGE_PERCENT * n_bins // 100)


def extract_ridge(spec: Spectrogram) -> RidgePoints:
    """Keep the 5% highest-power frequency bins of every time column.

    Ties go to the lower frequency. Zero-power bins are never emitted, so a
    silent column contributes nothing.
    """
    power = spec.power
    if power.size == 0:
        raise SpectrogramError("empty spectrogram")
    count = ridge_count(power.shape[1])
    order = np.argsort(-power, axis=1, kind="stable")[:, :count]
    cols = np.repeat(np.arange(power.shape[0]), count)
    bins = order.ravel()
    w = power[cols, bins]
    keep = w > 0
    return RidgePoints(times=spec.times[cols[keep]], freqs=spec.freqs[bins[keep]],
                       weights=w[keep], per_column=count)


def bspline_basis(x, knots, degree=3):
    """Design matrix of B-spline basis functions at ``x`` (Cox-de Boor).

    ``x`` must lie inside ``[knots[degree], knots[-degree-1]]``. The right
    end of the support belongs to the last non-empty interval.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(knots, dtype=np.float64)
    n_basis = t.size - degree - 1
    lo, hi = t[degree], t[n_basis]
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, degree, n_basis - 1)
    basis = np.zeros((x.size, t.size - 1))
    basis[np.arange(x.size), span] = 1.0
    for d in range(1, degree + 1):
        nxt = np.zeros((x.size, t.size - 1 - d))
        for i in range(t.size - 1 - d):
            left = t[i + d] - t[i]
            right = t[i + d + 1] - t[i + 1]
            term = np.zeros(x.size)
            if left > 0:
                term += (x - t[i]) / left * basis[:, i]
            if right > 0:
                term += (t[i + d + 1] - x) / right * basis[:, i + 1]
            nxt[:, i] = term
        basis = nxt
    outside = (x < lo - 1e-12 * max(1.0, abs(lo))) | (x > hi + 1e-12 * max(1.0, abs(hi)))
    basis[outside] = 0.0
    return basis[:, :n_basis]


@dataclass(frozen=True, eq=False)
class RidgeCurve:
    """Cubic B-spline fitted to ridge points, clamped to ``[0, nyquist]``."""

    knots: np.ndarray
    coefficients: np.ndarray
    nyquist: float
    degree: int = 3

    @property
    def support(self):
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        lo, hi = self.support
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise ValueError(f"evaluation outside fitted support [{lo}, {hi}]")
        values = bspline_basis(np.clip(np.atleast_1d(t), lo, hi), self.knots, self.degree)
        out = np.clip(values @ self.coefficients, 0.0, self.nyquist)
        return out.reshape(t.shape)

    def scaled(self, factor):
        return RidgeCurve(self.knots, self.coefficients * factor, self.nyquist * factor, self.degree)


def uniform_knots(lo, hi, spacing, degree=3):
    n_int = max(1, int(round((hi - lo) / spacing)))
    inner = np.linspace(lo, hi, n_int + 1)
    return np.concatenate([[lo] * degree, inner, [hi] * degree])


def fit_ridge_spline(points: RidgePoints, knot_spacing_s: float = 2.0,
                     nyquist: float = np.inf) -> RidgeCurve:
    """Power-weighted least-squares cubic spline through the ridge points.

    Minimises ``sum_j w_j (f(t_j) - nu_j)^2`` with ``w_j`` the spectrogram
    power, on uniform knots roughly ``knot_spacing_s`` apart.
    """
    if knot_spacing_s <= 0:
        raise SplineFitError("knot spacing must be positive")
    columns = np.unique(points.times)
    if columns.size < 4:
        raise SplineFitError(f"need at least 4 time columns with ridge points, got {columns.size}")
    knots = uniform_knots(columns[0], columns[-1], knot_spacing_s)
    n_coef = knots.size - 4
    if columns.size < n_coef:
        raise SplineFitError(
            f"{columns.size} time columns cannot determine {n_coef} spline coefficients; "
            f"increase the knot spacing above {knot_spacing_s} s")
    b = bspline_basis(points.times, knots)
    sw = np.sqrt(points.weights / points.weights.max())
    coef, _, rank, _ = np.linalg.lstsq(b * sw[:, None], points.freqs * sw, rcond=None)
    if rank < n_coef:
        raise SplineFitError(
            f"spline system is rank deficient ({rank} < {n_coef}); "
            f"increase the knot spacing above {knot_spacing_s} s")
    return RidgeCurve(knots=knots, coefficients=coef, nyquist=nyquist)


def to_velocity(curve, span=None, sample_hz: float = 10.0) -> VelocityTrace:
    """Rotation rate (Hz) as half the ridge frequency, on a uniform grid."""
    if span is None:
        span = curve.support
    lo, hi = span
    if hi < lo:
        raise ValueError("empty time span")
    n = int(math.floor((hi - lo) * sample_hz + 1e-9)) + 1
    times = lo + np.arange(n) / sample_hz
    return VelocityTrace(times, 0.5 * curve(times))


@dataclass(frozen=True)
class AnalysisConfig:
    target_side: int = DEFAULT_TARGET_SIDE
    k: int | None = None
    window_s: float = 8.0
    hop_s: float = 1.0
    pad_factor: int = 4
    f_min: float = DEFAULT_F_MIN
    knot_spacing_s: float = 2.0
    velocity_hz: float = 10.0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    embedding: Embedding1D
    spectrogram: Spectrogram
    ridge: RidgePoints
    curve: RidgeCurve
    velocity: VelocityTrace
    meta: dict = field(default_factory=dict)


def aliasing_risk(spec: Spectrogram, ridge: RidgePoints):
    """True if the ridge reaches the top 10% of the frequency axis in >= 5% of windows."""
    top = ridge.freqs >= 0.9 * spec.nyquist
    touched = np.unique(ridge.times[top]).size
    return bool(touched >= 0.05 * spec.times.size)


def analyze_detailed(seq: ImageSequence, config: AnalysisConfig = AnalysisConfig()) -> AnalysisResult:
    """Run the full pipeline and keep every intermediate product."""
    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise StageError(name, exc) from exc

    emb = stage("embedding", embed_sequence, seq, config.target_side, config.k)
    spec = stage("spectrogram", stft_spectrogram, emb, config.window_s, config.hop_s,
                 config.pad_factor, config.f_min)
    ridge = stage("ridge", extract_ridge, spec)
    curve = stage("spline", fit_ridge_spline, ridge, config.knot_spacing_s, spec.nyquist)
    trace = stage("velocity", to_velocity, curve, None, config.velocity_hz)
    meta = {
        "config": config.to_dict(),
        "fs": seq.fps,
        "n_frames": len(seq),
        "bin_width_hz": spec.bin_width,
        "ridge_points_per_window": ridge.per_column,
        "aliasing_risk": aliasing_risk(spec, ridge),
        "embedding": dict(emb.meta, eigenvalue=emb.eigenvalue),
    }
    velocity = VelocityTrace(trace.times, trace.velocities, meta=meta)
    return AnalysisResult(emb, spec, ridge, curve, velocity, meta)


def analyze(seq: ImageSequence, config: AnalysisConfig = AnalysisConfig()) -> VelocityTrace:
    """Rotation rate over time from an image sequence of a rotating bar."""
    return analyze_detailed(seq, config).velocity


def write_spectrogram(spec: Spectrogram, path) -> None:
    """CSV matrix: first row holds the frequencies, first column the window times."""
    rows = ["time_s\\freq_hz," + ",".join(repr(float(f)) for f in spec.freqs)]
    for t, p in zip(spec.times, spec.power):
        rows.append(repr(float(t)) + "," + ",".join(repr(float(v)) for v in p))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
