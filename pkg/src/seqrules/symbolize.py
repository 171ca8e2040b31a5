"""Turn raw sequences into fuzzy interpretation vectors.

A sequence of length T is cut into every window of length ``l`` (stride 1).
Each window is embedded by the encoder and softly assigned to one of K
cluster centers. Windows are grouped into R regions by their start index,
the per-region assignment mass is summed and pushed through a softmax over
clusters, and the resulting K x R matrix is flattened region-major: entry
``j*K + i`` is the truth degree of ``pattern_i`` in ``region_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgument
from .nn import DenseNet, net_backward, net_forward, softmax_rows


@dataclass
class SymbolizerConfig:
    window: int = 5
    regions: int = 4
    clusters: int = 3
    embed_dim: int = 8
    alpha: float = 1000.0

    def validate(self, length: int | None = None):
        if self.window < 1 or self.regions < 1 or self.clusters < 1 or self.embed_dim < 1:
            raise InvalidArgument("window, regions, clusters and embed_dim must be >= 1")
        if self.alpha < 0:
            raise InvalidArgument("alpha must be >= 0")
        if length is not None and self.window > length:
            raise InvalidArgument(f"window {self.window} longer than sequence {length}")

    @property
    def n_atoms(self) -> int:
        return self.clusters * self.regions


# -- windows and regions -----------------------------------------------------


def slide_windows(x, l: int):
    """All ``len(x) - l + 1`` windows of ``x``; row ``i`` starts at index ``i``."""
    x = np.asarray(x, dtype=np.float64)
    if l < 1 or l > x.shape[-1]:
        raise InvalidArgument(f"window length {l} invalid for sequence of length {x.shape[-1]}")
    return sliding_window_view(x, l, axis=-1).copy()


def region_length(T: int, R: int) -> int:
    return math.ceil(T / R)


def assign_region(start_index, T: int, R: int):
    """Region of a window, decided by its first point."""
    return np.asarray(start_index) // region_length(T, R)


def region_membership(T: int, l: int, R: int):
    """``(T-l+1, R)`` indicator matrix: window ``s`` lies in region ``j``."""
    starts = np.arange(T - l + 1)
    P = np.zeros((starts.size, R))
    P[starts, assign_region(starts, T, R)] = 1.0
    return P


# -- clustering --------------------------------------------------------------


def sq_dists(z, centers):
    """Squared Euclidean distances, ``(..., p) x (K, p) -> (..., K)``."""
    z = np.asarray(z, dtype=np.float64)
    diff = z[..., None, :] - centers
    return np.einsum("...kp,...kp->...k", diff, diff)


def _softmin(D, alpha):
    logits = -alpha * D
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def soft_assign(z, centers, alpha: float):
    """Differentiable nearest-center weights ``softmax(-alpha * ||z - r_k||^2)``."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] == 0:
        raise InvalidArgument("soft_assign: empty cluster bank")
    if alpha < 0:
        raise InvalidArgument("soft_assign: alpha must be >= 0")
    return _softmin(sq_dists(z, centers), alpha)


def hard_assign(z, centers):
    """One-hot nearest center (ties go to the lowest index)."""
    D = sq_dists(z, centers)
    out = np.zeros_like(D)
    np.put_along_axis(out, D.argmin(axis=-1)[..., None], 1.0, axis=-1)
    return out


def soft_assign_backward(G, grad_G, alpha: float):
    """dL/dD for ``G = softmax(-alpha D)``."""
    inner = np.sum(grad_G * G, axis=-1, keepdims=True)
    return -alpha * G * (grad_G - inner)


def sq_dists_backward(z, centers, grad_D):
    """Gradients of the distance matrix w.r.t. ``z`` and the centers."""
    diff = z[..., None, :] - centers  # (..., K, p)
    scaled = 2.0 * grad_D[..., None] * diff
    grad_z = scaled.sum(axis=-2)
    grad_centers = -scaled.reshape(-1, *centers.shape).sum(axis=0)
    return grad_z, grad_centers


def cluster_term(D, G, alpha: float):
    """Per-window ``sum_k D_k G_k`` and its gradient w.r.t. ``D`` (G depends on D)."""
    value = np.sum(D * G, axis=-1)
    grad_D = G * (1.0 - alpha * (D - value[..., None]))
    return value, grad_D


# -- region aggregation ------------------------------------------------------


def cluster_index_tensor(assignments, T: int, R: int):
    """Place per-window assignments ``(T-l+1, K)`` into a ``(K, l_p, R)`` tensor.

    Slots with no window stay all-zero.
    """
    assignments = np.asarray(assignments, dtype=np.float64)
    n_windows, K = assignments.shape
    lp = region_length(T, R)
    out = np.zeros((K, lp, R))
    starts = np.arange(n_windows)
    regions = assign_region(starts, T, R)
    out[:, starts - regions * lp, regions] = assignments.T
    return out


def region_cluster_matrix(c_x):
    """Sum a ``(K, l_p, R)`` tensor over slots, then softmax over clusters per region."""
    c = np.asarray(c_x, dtype=np.float64).sum(axis=1)
    return softmax_rows(c.T).T


def flatten_region_major(c_p):
    """``(..., K, R) -> (..., R*K)`` with index ``j*K + i``."""
    c_p = np.asarray(c_p)
    return np.swapaxes(c_p, -1, -2).reshape(*c_p.shape[:-2], -1)


def unflatten_region_major(v, K: int):
    v = np.asarray(v)
    R = v.shape[-1] // K
    return np.swapaxes(v.reshape(*v.shape[:-1], R, K), -1, -2)


def discretize(c_p):
    """One-hot of the per-column maximum; ties go to the lowest cluster index."""
    c_p = np.asarray(c_p)
    out = np.zeros_like(c_p, dtype=np.float64)
    idx = c_p.argmax(axis=-2)
    np.put_along_axis(out, idx[..., None, :], 1.0, axis=-2)
    return out


def discretize_vector(v, K: int):
    return flatten_region_major(discretize(unflatten_region_major(v, K)))


# -- the full symbolization ---------------------------------------------------


@dataclass
class SymbolizeCache:
    windows: np.ndarray  # (B, W, l)
    acts: list  # encoder activations on the (B*W, l) window batch
    Z: np.ndarray  # (B*W, p)
    D: np.ndarray  # (B, W, K)
    G: np.ndarray  # (B, W, K)
    c_p: np.ndarray  # (B, K, R)
    membership: np.ndarray  # (W, R)


def symbolize_batch(X, encoder: DenseNet, centers, cfg: SymbolizerConfig):
    """Fuzzy interpretation vectors for a ``(B, T)`` batch; returns ``(V, cache)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B, T = X.shape
    cfg.validate(T)
    if encoder.n_in != cfg.window:
        raise InvalidArgument(f"encoder expects windows of {encoder.n_in}, config says {cfg.window}")
    windows = slide_windows(X, cfg.window)
    W = windows.shape[1]
    acts = net_forward(encoder, windows.reshape(B * W, cfg.window))
    Z = acts[-1][1]
    D = sq_dists(Z, centers).reshape(B, W, -1)
    G = _softmin(D, cfg.alpha)
    P = region_membership(T, cfg.window, cfg.regions)
    c = np.einsum("bwk,wr->bkr", G, P)
    c_p = softmax_rows(np.swapaxes(c, 1, 2))
    c_p = np.swapaxes(c_p, 1, 2)
    V = flatten_region_major(c_p)
    return V, SymbolizeCache(windows, acts, Z, D, G, c_p, P)


def symbolize(x, encoder: DenseNet, centers, cfg: SymbolizerConfig):
    """Fuzzy interpretation vector (length ``K*R``) of a single sequence."""
    V, _ = symbolize_batch(np.asarray(x, dtype=np.float64)[None, :], encoder, centers, cfg)
    return V[0]


def symbolize_backward_to_assignments(cache: SymbolizeCache, grad_V):
    """Push dL/dV back to dL/dG (per-window soft assignments)."""
    K = cache.c_p.shape[1]
    grad_cp = unflatten_region_major(grad_V, K)  # (B, K, R)
    # softmax over clusters, independently per region column
    inner = np.sum(grad_cp * cache.c_p, axis=1, keepdims=True)
    grad_c = cache.c_p * (grad_cp - inner)
    return np.einsum("bkr,wr->bwk", grad_c, cache.membership)


def symbolize_backward(cache: SymbolizeCache, grad_V, encoder: DenseNet, centers, alpha: float,
                       extra_grad_D=None):
    """Full backward pass from dL/dV to encoder parameters and centers.

    ``extra_grad_D`` lets a caller add gradient that reaches the distance
    matrix by another route (the clustering term of the objective).
    """
    grad_G = symbolize_backward_to_assignments(cache, grad_V)
    grad_D = soft_assign_backward(cache.G, grad_G, alpha)
    if extra_grad_D is not None:
        grad_D = grad_D + extra_grad_D
    p = cache.Z.shape[-1]
    grad_Z, grad_centers = sq_dists_backward(cache.Z, centers, grad_D.reshape(-1, centers.shape[0]))
    enc_grads, _ = net_backward(encoder, cache.acts, grad_Z.reshape(-1, p))
    return enc_grads, grad_centers


# -- hard k-means -------------------------------------------------------------


def _kmeans_pp(points, K, rng):
    n = points.shape[0]
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = sq_dists(points, centers[:1])[:, 0]
    for k in range(1, K):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[k] = points[idx]
        closest = np.minimum(closest, sq_dists(points, centers[k:k + 1])[:, 0])
    return centers


def lloyd_kmeans(points, K: int, rng, max_iter: int = 100, init=None):
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments no longer change. A cluster that empties is
    re-seeded at the point farthest from its current center.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < K:
        raise InvalidArgument(f"need at least K={K} points, got {points.shape[0]}")
    centers = _kmeans_pp(points, K, rng) if init is None else np.array(init, dtype=np.float64)
    labels = None
    for _ in range(max_iter):
        D = sq_dists(points, centers)
        new_labels = D.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        nearest = D[np.arange(len(points)), labels]
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = points[members].mean(axis=0)
            else:
                far = int(nearest.argmax())
                centers[k] = points[far]
                labels[far] = k
                nearest[far] = 0.0
    return centers


# -- clustering objective -----------------------------------------------------


def dkm_terms(windows, encoder: DenseNet, decoder: DenseNet, centers, alpha: float):
    """Per-window reconstruction and clustering terms (squared Euclidean)."""
    windows = np.asarray(windows, dtype=np.float64).reshape(-1, encoder.n_in)
    Z = encoder(windows)
    recon = decoder(Z)
    r = np.sum((windows - recon) ** 2, axis=1)
    D = sq_dists(Z, centers)
    c, _ = cluster_term(D, _softmin(D, alpha), alpha)
    return r, c


def dkm_objective(windows, encoder, decoder, centers, alpha: float, lam1: float,
                  reduction: str = "sum") -> float:
    """Reconstruction plus ``lam1`` times the soft clustering cost.

    ``reduction="mean"`` averages over windows instead of summing.
    """
    r, c = dkm_terms(windows, encoder, decoder, centers, alpha)
    total = r + lam1 * c
    if reduction == "sum":
        return float(total.sum())
    if reduction == "mean":
        return float(total.mean())
    raise InvalidArgument(f"unknown reduction {reduction!r}")
