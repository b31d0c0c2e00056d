import time

import numpy as np
import pytest

from rotaphantom.core import AngleTrace
from rotaphantom.mechsim import derivative_trace, get_preset, simulate_release
from rotaphantom.render import GEOMETRIES, NOISE_PRESETS, render_sequence
from rotaphantom.spectral import analyze_detailed


def simulate_and_render(name, noise, seed):
    preset = get_preset(name)
    angles = simulate_release(preset.model, preset.duration)
    seq = render_sequence(angles, GEOMETRIES[name], NOISE_PRESETS[noise], preset.fps, seed)
    return angles, derivative_trace(angles), seq


def interior_rms(velocity, truth, half_window):
    lo, hi = truth.times[0] + half_window, truth.times[-1] - half_window
    keep = (velocity.times >= lo - 1e-9) & (velocity.times <= hi + 1e-9)
    err = velocity.velocities[keep] - np.interp(velocity.times[keep], truth.times, truth.velocities)
    return float(np.sqrt(np.mean(err**2)))


def constant_rotation(rate_hz, duration, fps):
    t = np.linspace(0.0, duration, int(round(duration * 1000)) + 1)
    return AngleTrace(t, 2 * np.pi * rate_hz * t)


@pytest.fixture(scope="session")
def spring_run():
    """'3dp' preset, MRI-like noise, analysed once for the whole session."""
    start = time.perf_counter()
    angles, truth, seq = simulate_and_render("3dp", "mri", 1)
    result = analyze_detailed(seq)
    return truth, seq, result, time.perf_counter() - start


@pytest.fixture(scope="session")
def band_run():
    angles, truth, seq = simulate_and_render("lego", "mri", 1)
    return truth, seq, analyze_detailed(seq)


@pytest.fixture(scope="session")
def constant_run():
    """Noiseless bar turning at 0.4 Hz for 60 s at 20 fps."""
    geom = GEOMETRIES["3dp"]
    seq = render_sequence(constant_rotation(0.4, 60.0, 20.0), geom, NOISE_PRESETS["none"], 20.0)
    return seq, analyze_detailed(seq)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
