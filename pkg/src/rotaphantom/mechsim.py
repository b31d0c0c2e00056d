"""Release dynamics of a wound spring or elastic band driving a rotating bar.

The axle obeys

    I * dw/dt = k * max(phi - theta, 0) * (1 + j(t)) - b * w - g * sign(w)

with ``j(t) = a * sin(2 pi t / T)`` a torque jitter standing in for the
irregular behaviour of elastic bands. The motion starts from rest at
``theta = 0`` and stops for good once the velocity would cross zero while
the driving torque no longer exceeds the Coulomb friction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import AngleTrace, VelocityTrace

__all__ = [
    "MechanicalModel",
    "SimPreset",
    "SimulationInstability",
    "simulate_release",
    "derivative_trace",
    "builtin_presets",
    "get_preset",
    "run_length",
]

DEFAULT_DT = 1e-3
MAX_OMEGA = 1e3


class SimulationInstability(RuntimeError):
    pass


@dataclass(frozen=True)
class MechanicalModel:
    """Lumped parameters of the energy store and the rotating load.

    Attributes
    ----------
    inertia : float
        Moment of inertia, kg m^2.
    spring_constant : float
        Torsional stiffness, N m / rad.
    wound_angle : float
        Angle wound into the store before release, rad.
    viscous_drag : float
        Velocity-proportional drag, N m s / rad.
    coulomb_friction : float
        Constant friction torque, N m.
    jitter_amplitude : float
        Relative amplitude of the sinusoidal torque modulation, in [0, 1).
    jitter_period : float
        Period of the modulation, s.
    """

    inertia: float
    spring_constant: float
    wound_angle: float
    viscous_drag: float = 0.0
    coulomb_friction: float = 0.0
    jitter_amplitude: float = 0.0
    jitter_period: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.inertia <= 0:
            raise ValueError("inertia must be positive")
        for name in ("spring_constant", "wound_angle", "viscous_drag", "coulomb_friction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.jitter_amplitude < 1:
            raise ValueError("jitter_amplitude must lie in [0, 1)")
        if self.jitter_period <= 0:
            raise ValueError("jitter_period must be positive")

    def driving_torque(self, t, theta):
        jitter = self.jitter_amplitude * math.sin(2 * math.pi * t / self.jitter_period)
        return self.spring_constant * max(self.wound_angle - theta, 0.0) * (1.0 + jitter)

    def energy(self, theta, omega):
        """Kinetic plus stored elastic energy, J."""
        stored = max(self.wound_angle - theta, 0.0)
        return 0.5 * self.inertia * omega**2 + 0.5 * self.spring_constant * stored**2


@dataclass(frozen=True)
class SimPreset:
    name: str
    model: MechanicalModel
    duration: float
    fps: float

    def __post_init__(self):
        if self.duration <= 0 or self.fps <= 0:
            raise ValueError("duration and fps must be positive")

    def to_dict(self):
        return {"name": self.name, "duration": self.duration, "fps": self.fps,
                "model": asdict(self.model)}


def _accel(model, t, theta, omega, friction):
    return (model.driving_torque(t, theta) - model.viscous_drag * omega - friction) / model.inertia


def _integrate(model, duration, dt):
    if not (0 < dt <= 1e-2):
        raise ValueError(f"dt must lie in (0, 1e-2], got {dt}")
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(math.floor(duration / dt + 1e-9)) + 1
    times = np.arange(n) * dt
    theta = np.zeros(n)
    omega = np.zeros(n)
    th, w = 0.0, 0.0
    stopped = model.driving_torque(0.0, 0.0) <= model.coulomb_friction
    stop_time = 0.0 if stopped else None
    for i in range(1, n):
        if stopped:
            theta[i] = th
            continue
        t = times[i - 1]
        h = dt
        # The release never reverses, so Coulomb friction opposes forward motion
        # throughout the step; evaluating sign(w) per stage chatters near w = 0.
        g = model.coulomb_friction
        if w == 0.0:
            g = min(g, model.driving_torque(t, th))
        k1t, k1w = w, _accel(model, t, th, w, g)
        k2t, k2w = w + 0.5 * h * k1w, _accel(model, t + 0.5 * h, th + 0.5 * h * k1t, w + 0.5 * h * k1w, g)
        k3t, k3w = w + 0.5 * h * k2w, _accel(model, t + 0.5 * h, th + 0.5 * h * k2t, w + 0.5 * h * k2w, g)
        k4t, k4w = w + h * k3w, _accel(model, t + h, th + h * k3t, w + h * k3w, g)
        th_new = th + h / 6 * (k1t + 2 * k2t + 2 * k3t + k4t)
        w_new = w + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if not math.isfinite(w_new) or abs(w_new) > MAX_OMEGA:
            raise SimulationInstability(
                f"angular velocity diverged at t={times[i]:.4g} s; try a smaller dt than {dt}"
            )
        if w_new <= 0.0 and w > 0.0:
            # Stop inside the step: keep the portion travelled before w reached 0.
            frac = w / (w - w_new)
            th_stop = th + frac * (th_new - th)
            if model.driving_torque(t + frac * h, th_stop) <= model.coulomb_friction:
                th, w = max(th_stop, th), 0.0
                stopped = True
                stop_time = t + frac * h
                theta[i] = th
                continue
            w_new = 0.0
        th, w = th_new, max(w_new, 0.0)
        theta[i] = th
        omega[i] = w
    return times, theta, omega, stop_time


def simulate_release(model: MechanicalModel, duration: float, dt: float = DEFAULT_DT) -> AngleTrace:
    """Integrate the release with fixed-step classical RK4.

    Returns the angle sampled every ``dt`` from 0 to ``duration``. After the
    stop event the angle stays constant.
    """
    times, theta, _, _ = _integrate(model, duration, dt)
    return AngleTrace(times, theta)


def run_length(model: MechanicalModel, max_duration: float = 600.0, dt: float = DEFAULT_DT):
    """Time at which the rotation stops, or ``None`` if it runs past ``max_duration``."""
    return _integrate(model, max_duration, dt)[3]


def derivative_trace(trace: AngleTrace) -> VelocityTrace:
    """Rotation rate in Hz from an angle trace by finite differences.

    Interior samples use central differences ``(x[i+1] - x[i-1]) / (t[i+1] - t[i-1])``;
    the two endpoints use one-sided differences. A constant angle gives
    exactly zero.
    """
    if len(trace) < 3:
        raise ValueError("derivative_trace needs at least 3 samples")
    rev = trace.angles / (2 * np.pi)
    t = trace.times
    rate = np.empty_like(rev)
    rate[1:-1] = (rev[2:] - rev[:-2]) / (t[2:] - t[:-2])
    rate[0] = (rev[1] - rev[0]) / (t[1] - t[0])
    rate[-1] = (rev[-1] - rev[-2]) / (t[-1] - t[-2])
    return VelocityTrace(trace.times, np.abs(rate))


# Frozen output of scripts/calibrate_presets.py (bisection on spring constant
# for the peak rate and on drag/friction for the run length).
_PRESETS = {
    "3dp": dict(
        model=dict(inertia=1e-4, spring_constant=0.0003895138450020376,
                   wound_angle=math.pi, viscous_drag=1e-6,
                   coulomb_friction=2.8499685425524036e-05,
                   jitter_amplitude=0.0, jitter_period=1.0),
        duration=21.0, fps=20.0),
    "lego": dict(
        model=dict(inertia=1e-4, spring_constant=7.851870697652012e-06,
                   wound_angle=60 * math.pi, viscous_drag=0.0003001197455321604,
                   coulomb_friction=0.0006,
                   jitter_amplitude=0.2, jitter_period=22.0),
        duration=81.0, fps=20.0),
}


def builtin_presets():
    """The spring-driven ("3dp") and band-driven ("lego") phantom presets."""
    return [SimPreset(name=name, model=MechanicalModel(**p["model"]),
                      duration=p["duration"], fps=p["fps"])
            for name, p in _PRESETS.items()]


def get_preset(name):
    for preset in builtin_presets():
        if preset.name == name:
            return preset
    valid = ", ".join(p.name for p in builtin_presets())
    raise KeyError(f"unknown preset {name!r}; valid presets: {valid}")
