"""Calibrate the built-in mechanical presets.

Each preset fixes the inertia, wound angle, drag-to-friction ratio and jitter.
Two numbers are then tuned by nested bisection against the integrator:

* the spring constant, so the peak rotation rate hits the target;
* one loss term, so the rotation stops at the target run length. The
  spring phantom coasts down against Coulomb friction, so friction sets its
  run length; the band phantom is overdamped and its decay time is set by
  the viscous drag.

The printed dictionaries are pasted into ``rotaphantom.mechsim._PRESETS``.

    python scripts/calibrate_presets.py
"""

import dataclasses
import math

from rotaphantom.mechsim import MechanicalModel, derivative_trace, run_length, simulate_release

TARGETS = {
    # name: (peak Hz, run length s, run-length parameter, starting model)
    "3dp": (0.96, 20.0, "coulomb_friction", MechanicalModel(
        inertia=1e-4, spring_constant=3.7e-4, wound_angle=math.pi,
        viscous_drag=1e-6, coulomb_friction=3.2e-5)),
    "lego": (0.55, 80.0, "viscous_drag", MechanicalModel(
        inertia=1e-4, spring_constant=8.7e-6, wound_angle=60 * math.pi,
        viscous_drag=3e-4, coulomb_friction=6e-4,
        jitter_amplitude=0.2, jitter_period=22.0)),
}


def peak_hz(model, horizon):
    return float(derivative_trace(simulate_release(model, horizon)).velocities.max())


def bisect(f, lo, hi, target, iters, increasing=True):
    """Geometric bisection for f(x) == target on [lo, hi]."""
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        above = f(mid) > target
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def calibrate(peak, length, knob, base, iters=24):
    def with_params(scale, kappa):
        return dataclasses.replace(base, spring_constant=kappa,
                                   **{knob: getattr(base, knob) * scale})

    def tuned_kappa(scale):
        k0 = base.spring_constant
        return bisect(lambda k: peak_hz(with_params(scale, k), 0.5 * length),
                      k0 / 20, k0 * 20, peak, iters)

    def stop_time(scale):
        t = run_length(with_params(scale, tuned_kappa(scale)), max_duration=3 * length)
        return math.inf if t is None else t

    # More friction shortens a coast-down; more drag (with the spring re-tuned
    # to keep the peak) slows the overdamped decay.
    increasing = knob == "viscous_drag"
    scale = bisect(stop_time, 0.05, 5.0, length, iters, increasing=increasing)
    return with_params(scale, tuned_kappa(scale))


def main():
    for name, (peak, length, knob, base) in TARGETS.items():
        model = calibrate(peak, length, knob, base)
        print(f"{name}: {dataclasses.asdict(model)}")
        print(f"  peak {peak_hz(model, length):.6f} Hz, stops at {run_length(model):.4f} s")


if __name__ == "__main__":
    main()
