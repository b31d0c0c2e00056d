"""Consistency statistics over repeated velocity traces.

Two groups of runs (typically two imaging modalities of the same phantom)
are summarised the way a phantom reproducibility table reports them:
intra-group RMS dispersion about the group mean, RMS / mean / std of the
difference of group means, the peak of the mean trace, and a one-way ANOVA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import betainc

from .core import VelocityTrace

__all__ = [
    "AlignmentError",
    "AnovaResult",
    "ConsistencyReport",
    "resample_common",
    "common_grid",
    "intra_dispersion",
    "inter_difference",
    "one_way_anova",
    "f_survival",
    "build_report",
    "format_table",
]

DEFAULT_GRID_HZ = 10.0


class AlignmentError(ValueError):
    pass


def common_grid(traces: Sequence[VelocityTrace], grid_hz: float = DEFAULT_GRID_HZ) -> np.ndarray:
    """Uniform grid over the intersection of the traces' time supports."""
    if grid_hz <= 0:
        raise ValueError("grid_hz must be positive")
    lo = max(float(tr.times[0]) for tr in traces)
    hi = min(float(tr.times[-1]) for tr in traces)
    if hi < lo:
        raise AlignmentError(f"time supports do not overlap (latest start {lo:g} s, "
                             f"earliest end {hi:g} s)")
    n = int(math.floor((hi - lo) * grid_hz + 1e-9)) + 1
    return lo + np.arange(n) / grid_hz


def resample_common(traces: Sequence[VelocityTrace], grid_hz: float = DEFAULT_GRID_HZ):
    """Linearly interpolate every trace onto one common grid.

    Returns ``(grid, aligned)`` with ``aligned[i]`` the i-th trace on ``grid``.
    """
    if len(traces) < 2:
        raise ValueError("need at least 2 traces to align")
    grid = common_grid(traces, grid_hz)
    aligned = np.vstack([np.interp(grid, tr.times, tr.velocities) for tr in traces])
    return grid, aligned


def intra_dispersion(aligned):
    """Mean trace and RMS of the deviations of each row from it."""
    a = np.asarray(aligned, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2:
        raise ValueError("need a 2D array with at least 2 rows")
    # centring on one row first keeps identical rows exactly identical to the mean
    mean = a[0] + (a - a[0]).mean(axis=0)
    rms = float(np.sqrt(np.mean((a - mean) ** 2)))
    return mean, rms


def inter_difference(mean_a: VelocityTrace, mean_b: VelocityTrace, grid_hz: float = DEFAULT_GRID_HZ):
    """``(rms, mean, std)`` of ``mean_a - mean_b`` on their common grid.

    The standard deviation is the population one (``ddof=0``).
    """
    _, (a, b) = resample_common([mean_a, mean_b], grid_hz)
    d = a - b
    return float(np.sqrt(np.mean(d * d))), float(d.mean()), float(d.std())


class AnovaResult(NamedTuple):
    F: float
    p: float
    degenerate: bool = False


def f_survival(f, dfn, dfd):
    """P(X > f) for X ~ F(dfn, dfd), via the regularised incomplete beta function."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(betainc(dfd / 2.0, dfn / 2.0, dfd / (dfd + dfn * f)))


def one_way_anova(groups) -> AnovaResult:
    """One-way ANOVA F test of equal group means.

    With zero within-group variance the test degenerates: equal means give
    ``F = 0, p = 1``; unequal means give ``F = inf, p = 0``. Both are flagged.
    """
    groups = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    k = len(groups)
    if k < 2:
        raise ValueError("need at least 2 groups")
    if any(g.size < 2 for g in groups):
        raise ValueError("every group needs at least 2 samples")
    n = sum(g.size for g in groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(np.sum((g - g.mean()) ** 2) for g in groups)
    dfn, dfd = k - 1, n - k
    scale = sum(np.sum(g * g) for g in groups)
    if ss_within <= 1e-14 * max(scale, 1e-300):
        if ss_between <= 1e-14 * max(scale, 1e-300):
            return AnovaResult(0.0, 1.0, True)
        return AnovaResult(math.inf, 0.0, True)
    f = (ss_between / dfn) / (ss_within / dfd)
    return AnovaResult(float(f), f_survival(f, dfn, dfd), False)


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    """Summary statistics in Hz; the ``*_b`` and inter/ANOVA fields need two groups."""

    mean_trace: VelocityTrace
    intra_rms: float
    max_velocity: float
    n_runs: int
    mean_trace_b: Optional[VelocityTrace] = None
    intra_rms_b: Optional[float] = None
    max_velocity_b: Optional[float] = None
    n_runs_b: Optional[int] = None
    inter_rms: Optional[float] = None
    inter_mean: Optional[float] = None
    inter_std: Optional[float] = None
    anova_F: Optional[float] = None
    anova_p: Optional[float] = None
    anova_degenerate: Optional[bool] = None
    config: dict = field(default_factory=dict)

    def to_dict(self):
        def trace(tr):
            if tr is None:
                return None
            return {"time_s": [float(t) for t in tr.times],
                    "velocity_hz": [float(v) for v in tr.velocities]}

        out = {
            "n_runs": self.n_runs,
            "intra_rms": self.intra_rms,
            "max_velocity": self.max_velocity,
            "n_runs_b": self.n_runs_b,
            "intra_rms_b": self.intra_rms_b,
            "max_velocity_b": self.max_velocity_b,
            "inter_rms": self.inter_rms,
            "inter_mean": self.inter_mean,
            "inter_std": self.inter_std,
            "anova_F": self.anova_F,
            "anova_p": self.anova_p,
            "anova_degenerate": self.anova_degenerate,
            "config": self.config,
            "mean_trace": trace(self.mean_trace),
            "mean_trace_b": trace(self.mean_trace_b),
        }
        if out["anova_F"] is not None and math.isinf(out["anova_F"]):
            out["anova_F"] = "inf"
        return out


def _group_mean(traces, grid_hz):
    grid, aligned = resample_common(traces, grid_hz)
    mean, rms = intra_dispersion(aligned)
    return VelocityTrace(grid, mean), rms


def build_report(group_a: Sequence[VelocityTrace], group_b: Optional[Sequence[VelocityTrace]] = None,
                 grid_hz: float = DEFAULT_GRID_HZ, anova_unit: str = "samples") -> ConsistencyReport:
    """Table-style consistency summary of one or two groups of runs.

    ``anova_unit`` selects the ANOVA observations: ``"samples"`` pools every
    run's values on the grid common to all runs of both groups;
    ``"run_means"`` uses one time-averaged velocity per run.
    """
    if anova_unit not in ("samples", "run_means"):
        raise ValueError("anova_unit must be 'samples' or 'run_means'")
    if len(group_a) < 2:
        raise ValueError("group A needs at least 2 traces")
    config = {"grid_hz": grid_hz, "anova_unit": anova_unit, "std": "population",
              "difference": "A - B"}
    mean_a, rms_a = _group_mean(group_a, grid_hz)
    if group_b is None:
        return ConsistencyReport(mean_trace=mean_a, intra_rms=rms_a,
                                 max_velocity=float(mean_a.velocities.max()),
                                 n_runs=len(group_a), config=config)
    if len(group_b) < 2:
        raise ValueError("group B needs at least 2 traces")
    mean_b, rms_b = _group_mean(group_b, grid_hz)
    inter_rms, inter_mean, inter_std = inter_difference(mean_a, mean_b, grid_hz)
    grid, aligned = resample_common(list(group_a) + list(group_b), grid_hz)
    na = len(group_a)
    if anova_unit == "samples":
        obs = [aligned[:na].ravel(), aligned[na:].ravel()]
    else:
        obs = [aligned[:na].mean(axis=1), aligned[na:].mean(axis=1)]
    anova = one_way_anova(obs)
    return ConsistencyReport(
        mean_trace=mean_a, intra_rms=rms_a, max_velocity=float(mean_a.velocities.max()),
        n_runs=na, mean_trace_b=mean_b, intra_rms_b=rms_b,
        max_velocity_b=float(mean_b.velocities.max()), n_runs_b=len(group_b),
        inter_rms=inter_rms, inter_mean=inter_mean, inter_std=inter_std,
        anova_F=anova.F, anova_p=anova.p, anova_degenerate=anova.degenerate, config=config)


def format_table(report: ConsistencyReport, label: str = "", names=("A", "B")) -> str:
    """Plain-text table with one row per phantom, values in Hz."""
    a, b = names
    head = ["", f"RMS {a}", f"RMS {b}", f"RMS {a}-{b}", f"av +- std {a}-{b}", "max vel.", "ANOVA p"]

    def fmt(x):
        return "-" if x is None else f"{x:.2f}"

    if report.inter_mean is None:
        avstd = "-"
        max_vel = report.max_velocity
        p = "-"
    else:
        avstd = f"{report.inter_mean:+.2f} +- {report.inter_std:.2f}"
        max_vel = 0.5 * (report.max_velocity + report.max_velocity_b)
        p = f"{report.anova_p:.3g}"
    row = [label, fmt(report.intra_rms), fmt(report.intra_rms_b), fmt(report.inter_rms),
           avstd, fmt(max_vel), p]
    widths = [max(len(h), len(r)) for h, r in zip(head, row)]
    line = lambda cells: " | ".join(c.rjust(w) for c, w in zip(cells, widths))
    return "\n".join([line(head), "-+-".join("-" * w for w in widths), line(row)]) + "\n"
