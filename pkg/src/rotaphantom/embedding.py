"""One-dimensional Laplacian eigenmap of an image sequence.

Frames are downsampled, standardised, joined into a symmetric k-nearest
neighbour graph with heat-kernel weights, and embedded with the first
non-trivial solution of ``L f = lambda D f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .core import ImageSequence

__all__ = [
    "AffinityGraph",
    "Embedding1D",
    "DegenerateFrameError",
    "EigenSolverError",
    "default_k",
    "preprocess_frames",
    "pairwise_sqdist",
    "build_affinity",
    "laplacian_embed_1d",
    "embed_sequence",
    "write_embedding",
]

DEFAULT_TARGET_SIDE = 64


class DegenerateFrameError(ValueError):
    """A frame has zero variance and cannot be standardised."""


class EigenSolverError(ArithmeticError):
    pass


def default_k(n):
    return max(1, min(n - 1, max(10, int(round(0.02 * n)))))


def _box_matrix(n_in, n_out):
    """Row-stochastic matrix averaging ``n_in`` cells into ``n_out`` equal bins."""
    edges = np.linspace(0, n_in, n_out + 1)
    lo = np.maximum(edges[:-1, None], np.arange(n_in)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(1, n_in + 1)[None, :])
    overlap = np.clip(hi - lo, 0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def preprocess_frames(seq: ImageSequence, target_side: int = DEFAULT_TARGET_SIDE) -> np.ndarray:
    """Downsample and standardise every frame; returns an ``(n, pixels)`` matrix.

    Each axis longer than ``target_side`` is reduced by area-weighted box
    averaging (plain 2x2 means for 128 -> 64). Each frame is then shifted to
    zero mean and scaled to unit (population) variance.
    """
    if target_side < 8:
        raise ValueError("target_side must be at least 8")
    frames = seq.frames
    _, h, w = frames.shape
    if h > target_side:
        frames = np.einsum("oh,nhw->now", _box_matrix(h, target_side), frames)
    if w > target_side:
        frames = np.einsum("nhw,ow->nho", frames, _box_matrix(w, target_side))
    x = frames.reshape(frames.shape[0], -1).astype(np.float64)
    mean = x.mean(axis=1, keepdims=True)
    x = x - mean
    std = np.sqrt(np.mean(x * x, axis=1, keepdims=True))
    scale = np.maximum(np.abs(mean), 1.0)
    bad = np.flatnonzero(std[:, 0] <= 1e-12 * scale[:, 0])
    if bad.size:
        raise DegenerateFrameError(f"frame {bad[0]} has zero variance")
    return x / std


def pairwise_sqdist(vectors) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``vectors``.

    Uses the Gram-matrix expansion and recomputes near-coincident pairs by
    direct differencing, where the expansion loses all relative accuracy.
    The result is exactly symmetric with a zero diagonal.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2D array")
    sq = np.einsum("ij,ij->i", x, x)
    m = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(m, 0.0, out=m)
    close = m <= 1e-6 * (sq[:, None] + sq[None, :])
    ii, jj = np.nonzero(np.triu(close, 1))
    for start in range(0, ii.size, 4096):
        a, b = ii[start:start + 4096], jj[start:start + 4096]
        diff = x[a] - x[b]
        d = np.einsum("ij,ij->i", diff, diff)
        m[a, b] = d
        m[b, a] = d
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    return m


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    """Symmetric weighted graph over frames, stored as a dense weight matrix."""

    weights: np.ndarray
    kernel_scale: float
    k: int
    bridges: tuple = ()

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def degrees(self):
        return self.weights.sum(axis=1)

    @property
    def edges(self):
        """``(i, j, w)`` arrays listing both directions of every edge."""
        i, j = np.nonzero(self.weights)
        return i, j, self.weights[i, j]

    def n_components(self):
        return connected_components(self.weights > 0, directed=False)[0]


def _kernel_scale(sqdist, edge_mask):
    retained = sqdist[np.triu(edge_mask, 1)]
    retained = retained[retained > 0]
    if retained.size:
        return float(np.median(retained))
    # every retained edge joins identical frames
    off = sqdist[np.triu_indices_from(sqdist, 1)]
    off = off[off > 0]
    return float(np.median(off)) if off.size else 1.0


def build_affinity(sqdist, k: int | None = None) -> AffinityGraph:
    """Union k-NN graph with heat-kernel weights ``exp(-d2 / t)``.

    ``t`` is the median squared distance over retained edges (zero-length
    edges between identical frames are left out of the median). If the graph
    falls apart into several components, the shortest edge between distinct
    components is added until it is connected.
    """
    d2 = np.asarray(sqdist, dtype=np.float64)
    n = d2.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 frames to build a graph, got {n}")
    if k is None:
        k = default_k(n)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    ranked = d2.copy()
    np.fill_diagonal(ranked, np.inf)
    nearest = np.argsort(ranked, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nearest.ravel()] = True
    mask |= mask.T

    t = _kernel_scale(d2, mask)

    bridges = []
    n_comp, labels = connected_components(mask, directed=False)
    while n_comp > 1:
        between = np.where(labels[:, None] != labels[None, :], d2, np.inf)
        i, j = np.unravel_index(np.argmin(between), between.shape)
        mask[i, j] = mask[j, i] = True
        bridges.append((int(min(i, j)), int(max(i, j))))
        n_comp, labels = connected_components(mask, directed=False)

    w = np.where(mask, np.exp(-d2 / t), 0.0)
    # a very long bridge must keep a strictly positive weight
    w = np.where(mask, np.maximum(w, np.finfo(float).tiny), 0.0)
    np.fill_diagonal(w, 0.0)
    return AffinityGraph(weights=w, kernel_scale=t, k=k, bridges=tuple(bridges))


@dataclass(frozen=True, eq=False)
class Embedding1D:
    times: np.ndarray
    coords: np.ndarray
    eigenvalue: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64)
        c = np.array(self.coords, dtype=np.float64)
        if t.shape != c.shape or t.ndim != 1:
            raise ValueError("times and coords must be 1D arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(c))):
            raise ValueError("embedding contains non-finite values")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coords", c)

    def __len__(self):
        return self.coords.size

    @property
    def fs(self):
        return (len(self) - 1) / (self.times[-1] - self.times[0])


def laplacian_embed_1d(graph: AffinityGraph, times=None) -> Embedding1D:
    """Fiedler-type coordinate of the generalised problem ``L f = lambda D f``.

    Solved through the symmetric normalised matrix ``D^-1/2 L D^-1/2`` with a
    dense LAPACK eigensolver. The returned ``f`` satisfies ``f^T D f = 1`` and
    ``f^T D 1 = 0``; its sign makes the first clearly nonzero entry positive.
    """
    w = graph.weights
    n = graph.n
    if graph.n_components() != 1:
        raise ValueError("graph must be connected")
    deg = w.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.diag(deg) - w
    a = inv_sqrt[:, None] * lap * inv_sqrt[None, :]
    a = 0.5 * (a + a.T)
    try:
        vals, vecs = scipy.linalg.eigh(a, subset_by_index=[0, 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"symmetric eigensolver failed for n={n}: {exc}") from exc
    g = vecs[:, 1]
    f = g * inv_sqrt
    f = f - (deg @ f) / deg.sum()
    f = f / np.sqrt(f @ (deg * f))
    big = np.flatnonzero(np.abs(f) > 1e-8 * np.abs(f).max())
    if big.size and f[big[0]] < 0:
        f = -f
    if times is None:
        times = np.arange(n, dtype=np.float64)
    return Embedding1D(times=times, coords=f, eigenvalue=float(vals[1]))


def embed_sequence(seq: ImageSequence, target_side: int = DEFAULT_TARGET_SIDE,
                   k: int | None = None) -> Embedding1D:
    """Embed every frame of ``seq``.

    Identical frames are one point of the image manifold, so the graph is
    built over distinct frames and repeated frames share their coordinate.
    Without this, exact repeats (a noiseless bar at constant speed revisits
    the same images) fill every neighbour list and cut the manifold apart.
    """
    x = preprocess_frames(seq, target_side)
    distinct, first, inverse = np.unique(x, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # keep distinct frames in time order
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    distinct = distinct[order]
    if distinct.shape[0] < 3:
        raise ValueError(f"need at least 3 distinct frames, got {distinct.shape[0]}")
    if k is not None:
        k = min(k, distinct.shape[0] - 1)
    graph = build_affinity(pairwise_sqdist(distinct), k)
    emb = laplacian_embed_1d(graph)
    coords = emb.coords[rank[inverse]]
    meta = {"target_side": target_side, "k": graph.k, "kernel_scale": graph.kernel_scale,
            "bridges": len(graph.bridges), "distinct_frames": int(distinct.shape[0])}
    return Embedding1D(seq.times, coords, emb.eigenvalue, meta)


def write_embedding(emb: Embedding1D, path) -> None:
    lines = ["time_s,coord"] + [f"{float(t)!r},{float(c)!r}" for t, c in zip(emb.times, emb.coords)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
