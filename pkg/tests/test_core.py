import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rotaphantom.core import (AngleTrace, Frame, FormatError, ImageSequence, NonFiniteError,
                              TraceParseError, TruncatedError, VelocityTrace, read_sequence,
                              read_trace, write_pgm, write_sequence, write_trace)


def small_sequence(n=2, h=2, w=2, fps=20.0, t0=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return ImageSequence(rng.random((n, h, w)), fps=fps, t0=t0)


def test_mpsq_size_arithmetic(tmp_path):
    path = tmp_path / "s.mpsq"
    write_sequence(small_sequence(), path)
    # magic + 4 u32 + 2 f64, then 2 frames x 2 x 2 float32
    assert path.stat().st_size == 4 + 16 + 16 + 32
    assert path.read_bytes()[:4] == b"MPSQ"


def test_mpsq_header_fps(tmp_path):
    path = tmp_path / "s.mpsq"
    write_sequence(small_sequence(fps=20, t0=1.5), path)
    seq = read_sequence(path)
    assert seq.fps == 20.0
    assert seq.t0 == 1.5


@settings(max_examples=30, deadline=None)
@given(frames=hnp.arrays(np.float64, st.tuples(st.integers(2, 4), st.integers(1, 5), st.integers(1, 5)),
                         elements=st.floats(0, 1e6, allow_nan=False)),
       fps=st.floats(0.1, 1000), t0=st.floats(-100, 100))
def test_mpsq_round_trip_bit_exact(tmp_path_factory, frames, fps, t0):
    path = tmp_path_factory.mktemp("rt") / "s.mpsq"
    seq = ImageSequence(frames, fps=fps, t0=t0)
    write_sequence(seq, path)
    back = read_sequence(path)
    assert back.frames.tobytes() == seq.frames.tobytes()
    assert back.fps == seq.fps and back.t0 == seq.t0


def test_mpsq_bad_magic(tmp_path):
    path = tmp_path / "bad.mpsq"
    write_sequence(small_sequence(), path)
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="magic"):
        read_sequence(path)


def test_mpsq_truncated(tmp_path):
    path = tmp_path / "cut.mpsq"
    write_sequence(small_sequence(), path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncatedError):
        read_sequence(path)


def test_mpsq_nonfinite_payload(tmp_path):
    path = tmp_path / "nan.mpsq"
    write_sequence(small_sequence(), path)
    data = bytearray(path.read_bytes())
    data[-4:] = np.array([np.nan], dtype="<f4").tobytes()
    path.write_bytes(bytes(data))
    with pytest.raises(NonFiniteError):
        read_sequence(path)


def test_error_kinds_are_distinct():
    assert not issubclass(NonFiniteError, FormatError)
    assert issubclass(TruncatedError, FormatError)


def test_write_sequence_reports_path(tmp_path):
    target = tmp_path / "missing" / "s.mpsq"
    with pytest.raises(OSError, match="missing"):
        write_sequence(small_sequence(), target)


def test_trace_csv_exact_text(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(VelocityTrace([0.0], [0.96]), path)
    assert path.read_bytes() == b"time_s,velocity_hz\n0.0,0.96\n"


def test_empty_trace_is_header_only(tmp_path):
    path = tmp_path / "t.csv"
    write_trace(VelocityTrace([], []), path)
    assert path.read_text() == "time_s,velocity_hz\n"
    assert len(read_trace(path)) == 0


def test_trace_round_trip_random(tmp_path):
    rng = np.random.default_rng(3)
    trace = VelocityTrace(np.cumsum(rng.random(200)) + 0.01, rng.random(200) * 2)
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    back = read_trace(path)
    np.testing.assert_allclose(back.times, trace.times, rtol=1e-9)
    np.testing.assert_allclose(back.velocities, trace.velocities, rtol=1e-9)


def test_trace_malformed_row_line_number(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("time_s,velocity_hz\n0.0,0.5\n0.1,abc\n")
    with pytest.raises(TraceParseError) as info:
        read_trace(path)
    assert info.value.line == 3


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_constructors_reject_nonfinite(bad):
    with pytest.raises(ValueError):
        Frame(np.array([[0.0, bad]]))
    with pytest.raises(ValueError):
        ImageSequence(np.array([[[0.0]], [[bad]]]), fps=10)
    with pytest.raises(ValueError):
        AngleTrace([0.0, 1.0], [0.0, bad])
    with pytest.raises(ValueError):
        VelocityTrace([0.0, 1.0], [0.0, bad])


def test_sequence_invariants():
    with pytest.raises(ValueError):
        ImageSequence(np.zeros((1, 2, 2)), fps=10)
    with pytest.raises(ValueError):
        ImageSequence(np.zeros((2, 2, 2)), fps=0)
    with pytest.raises(ValueError):
        VelocityTrace([0.0, 1.0], [0.1, -0.1])
    with pytest.raises(ValueError):
        AngleTrace([0.0, 0.0], [0.0, 1.0])


def test_values_are_immutable():
    seq = small_sequence()
    with pytest.raises(ValueError):
        seq.frames[0, 0, 0] = 1.0


def test_angle_trace_wrapped_view():
    tr = AngleTrace([0.0, 1.0, 2.0], [0.0, 2 * math.pi + 0.5, 4 * math.pi + 1.0])
    np.testing.assert_allclose(tr.wrapped(), [0.0, 0.5, 1.0], atol=1e-12)
    assert tr.angles[2] > 4 * math.pi


def test_pgm_export(tmp_path):
    frame = Frame(np.array([[0.0, 0.5], [1.0, 0.25]]))
    path = tmp_path / "f.pgm"
    write_pgm(frame, path)
    data = path.read_bytes()
    header = b"P5\n2 2\n65535\n"
    assert data.startswith(header)
    pixels = np.frombuffer(data[len(header):], dtype=">u2")
    assert pixels.tolist() == [0, 32768, 65535, 16384]
