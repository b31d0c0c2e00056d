import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rotaphantom.core import AngleTrace, ImageSequence
from rotaphantom.embedding import (AffinityGraph, DegenerateFrameError, build_affinity, default_k,
                                   embed_sequence, laplacian_embed_1d, pairwise_sqdist,
                                   preprocess_frames)
from rotaphantom.render import NOISE_PRESETS, BarGeometry, render_sequence


def brute_sqdist(x):
    n = len(x)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum((a - b) ** 2 for a, b in zip(x[i], x[j]))
    return out


def graph_from_weights(w):
    return AffinityGraph(weights=np.asarray(w, float), kernel_scale=1.0, k=1)


@pytest.fixture(scope="module")
def small_sequence():
    """60 noisy frames of a small bar, fast enough for repeated embeddings."""
    geom = BarGeometry(0.11, 0.02, 0.2, resolution=32)
    t = np.linspace(0, 6, 601)
    trace = AngleTrace(t, 2 * np.pi * 0.3 * t)
    return render_sequence(trace, geom, NOISE_PRESETS["mri"], 10.0, seed=4)


# preprocessing

def test_preprocess_keeps_standardised_frame():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 16, 16))
    x = (x - x.mean(axis=(1, 2), keepdims=True)) / x.std(axis=(1, 2), keepdims=True)
    seq = ImageSequence(x, fps=1)
    np.testing.assert_allclose(preprocess_frames(seq, 16), seq.frames.reshape(3, -1), atol=1e-6)


def test_preprocess_removes_offset():
    rng = np.random.default_rng(1)
    x = rng.random((3, 16, 16))
    a = preprocess_frames(ImageSequence(x, fps=1), 16)
    b = preprocess_frames(ImageSequence(x + 5.0, fps=1), 16)
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_preprocess_two_by_two_box_means():
    rng = np.random.default_rng(2)
    seq = ImageSequence(rng.random((2, 128, 128)), fps=1)
    f = seq.frames
    boxed = f.reshape(2, 64, 2, 64, 2).mean(axis=(2, 4)).reshape(2, -1)
    boxed = boxed - boxed.mean(axis=1, keepdims=True)
    boxed /= boxed.std(axis=1, keepdims=True)
    np.testing.assert_allclose(preprocess_frames(seq, 64), boxed, atol=1e-10)


def test_preprocess_rejects_constant_frame():
    x = np.random.default_rng(3).random((3, 8, 8))
    x[1] = 0.7
    with pytest.raises(DegenerateFrameError, match="frame 1"):
        preprocess_frames(ImageSequence(x, fps=1), 8)


def test_preprocess_target_side_precondition():
    with pytest.raises(ValueError):
        preprocess_frames(ImageSequence(np.random.default_rng(0).random((2, 8, 8)), fps=1), 4)


# distances

def test_sqdist_examples():
    assert pairwise_sqdist([[0.0, 0.0], [3.0, 4.0]])[0, 1] == 25.0
    assert pairwise_sqdist([[1.5, -2.0, 7.0]] * 3).max() == 0.0


def test_sqdist_matches_double_loop():
    x = np.random.default_rng(5).standard_normal((5, 7))
    m = pairwise_sqdist(x)
    np.testing.assert_allclose(m, brute_sqdist(x), rtol=1e-12, atol=1e-12)
    assert np.array_equal(m, m.T) and np.all(np.diag(m) == 0)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(1, 5)),
                  elements=st.floats(-1e3, 1e3)))
def test_sqdist_property(x):
    m = pairwise_sqdist(x)
    np.testing.assert_allclose(m, brute_sqdist(x), rtol=1e-9, atol=1e-9)
    assert np.array_equal(m, m.T)


# graph

def hexagon_sqdist():
    a = np.arange(6) * np.pi / 3
    return pairwise_sqdist(np.column_stack([np.cos(a), np.sin(a)]))


def test_hexagon_ring_weights():
    d2 = hexagon_sqdist()
    g = build_affinity(d2, k=2)
    # dense oracle: ring neighbours at unit distance, median retained d2 = 1
    oracle = np.zeros((6, 6))
    for i in range(6):
        for j in ((i + 1) % 6, (i - 1) % 6):
            oracle[i, j] = math.exp(-d2[i, j] / 1.0)
    np.testing.assert_allclose(g.kernel_scale, 1.0, rtol=1e-12)
    np.testing.assert_allclose(g.weights, oracle, rtol=1e-12)
    i, j, w = g.edges
    np.testing.assert_allclose(w, math.exp(-1), rtol=1e-12)
    assert len(w) == 12


def test_weight_at_kernel_scale_is_inverse_e():
    d2 = np.array([[0, 2, 8], [2, 0, 2], [8, 2, 0]], float)
    g = build_affinity(d2, k=1)
    assert g.kernel_scale == 2.0
    assert g.weights[0, 1] == pytest.approx(math.exp(-1), rel=1e-12)


def test_two_clusters_bridged_once():
    pts = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [10.3]])
    d2 = pairwise_sqdist(pts)
    g = build_affinity(d2, k=1)
    assert g.n_components() == 1
    assert g.bridges == ((2, 3),)
    assert np.all(g.weights[g.weights > 0] <= 1.0)


def test_graph_symmetry_and_range():
    x = np.random.default_rng(8).standard_normal((40, 3))
    g = build_affinity(pairwise_sqdist(x))
    w = g.weights
    assert np.array_equal(w, w.T)
    assert np.all((w[w != 0] > 0) & (w[w != 0] <= 1))
    assert g.k == 10


def test_graph_preconditions():
    with pytest.raises(ValueError, match="at least 3"):
        build_affinity(np.zeros((2, 2)))
    d2 = pairwise_sqdist(np.arange(5.0)[:, None])
    for k in (0, 5):
        with pytest.raises(ValueError):
            build_affinity(d2, k=k)


def test_default_k():
    assert default_k(400) == 10
    assert default_k(1600) == 32
    assert default_k(5) == 4


# eigenmap

def check_eigenpair(graph, emb):
    w = graph.weights
    d = w.sum(axis=1)
    lap = np.diag(d) - w
    f = emb.coords
    lam = emb.eigenvalue
    residual = np.linalg.norm(lap @ f - lam * d * f)
    assert residual <= 1e-8 * np.linalg.norm(d * f)
    assert abs(d @ f) <= 1e-9 * np.sqrt(d.sum())
    assert f @ (d * f) == pytest.approx(1.0, rel=1e-12)
    assert np.linalg.norm(lap @ np.ones_like(f)) <= 1e-10 * np.linalg.norm(d)
    # second smallest generalised eigenvalue by an independent solver
    ref = scipy.linalg.eigh(lap, np.diag(d), eigvals_only=True)
    assert lam == pytest.approx(ref[1], rel=1e-8, abs=1e-12)


def test_path_graph_is_monotone():
    w = np.zeros((4, 4))
    for i in range(3):
        w[i, i + 1] = w[i + 1, i] = 1.0
    g = graph_from_weights(w)
    emb = laplacian_embed_1d(g)
    check_eigenpair(g, emb)
    assert np.all(np.diff(emb.coords) < 0) or np.all(np.diff(emb.coords) > 0)
    assert emb.coords[0] > 0


def test_hexagon_eigenpair():
    g = build_affinity(hexagon_sqdist(), k=2)
    check_eigenpair(g, laplacian_embed_1d(g))


@pytest.mark.parametrize("seed", range(5))
def test_random_graph_eigenpair(seed):
    x = np.random.default_rng(seed).standard_normal((80, 4))
    g = build_affinity(pairwise_sqdist(x), k=6)
    check_eigenpair(g, laplacian_embed_1d(g))


def test_disconnected_graph_rejected():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    with pytest.raises(ValueError, match="connected"):
        laplacian_embed_1d(graph_from_weights(w))


def test_sequence_eigenpair(small_sequence):
    x = preprocess_frames(small_sequence)
    g = build_affinity(pairwise_sqdist(x))
    check_eigenpair(g, laplacian_embed_1d(g, small_sequence.times))


def test_affine_intensity_invariance(small_sequence):
    a = embed_sequence(small_sequence)
    moved = ImageSequence(3.0 * small_sequence.frames + 2.0, small_sequence.fps)
    b = embed_sequence(moved)
    sign = np.sign(a.coords @ b.coords)
    np.testing.assert_allclose(a.coords, sign * b.coords, atol=1e-6)


def test_permutation_equivariance(small_sequence):
    perm = np.random.default_rng(11).permutation(len(small_sequence))
    a = embed_sequence(small_sequence).coords
    shuffled = ImageSequence(small_sequence.frames[perm], small_sequence.fps)
    b = np.empty_like(a)
    b[perm] = embed_sequence(shuffled).coords
    np.testing.assert_allclose(a, np.sign(a @ b) * b, atol=1e-9)


def test_embedding_times_follow_sequence(small_sequence):
    emb = embed_sequence(small_sequence)
    np.testing.assert_array_equal(emb.times, small_sequence.times)
    assert emb.fs == pytest.approx(10.0)


def test_constant_rotation_embedding_at_twice_rate(constant_run):
    seq, result = constant_run
    coords = result.embedding.coords
    spectrum = np.abs(np.fft.rfft(coords - coords.mean())) ** 2
    freqs = np.fft.rfftfreq(coords.size, 1 / seq.fps)
    assert abs(freqs[np.argmax(spectrum)] - 0.8) <= freqs[1]
