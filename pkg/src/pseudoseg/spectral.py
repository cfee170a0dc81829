"""Normalized spectral clustering of an affinity map.

Pipeline: clamp signed cosine similarities into nonnegative graph weights,
embed with the k smallest eigenvectors of the symmetric normalized Laplacian
L_sym = I - D^{-1/2} W D^{-1/2} (rows renormalized to unit length), then run
seeded k-means on the embedding rows. The problem size is tiny by
construction (n = grid_h * grid_w, typically 441), so a dense symmetric
eigensolver is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .affinity import AffinityMap
from .errors import DegenerateK, EigFailure, IsolatedVertex
from .seeds import splitmix64

_ROW_NORM_EPS = 1e-12


@dataclass(frozen=True)
class SpectralConfig:
    eig_tol: float = 1e-8
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.eig_tol <= 0:
            raise ValueError("eig_tol must be > 0")
        if self.kmeans_restarts < 1 or self.kmeans_max_iter < 1:
            raise ValueError("kmeans_restarts and kmeans_max_iter must be >= 1")


@dataclass(frozen=True)
class ClusterResult:
    """Per-pixel cluster assignment at feature-grid resolution."""

    k: int
    labels: np.ndarray  # (grid_h * grid_w,) int64, values in [0, k)
    grid_h: int
    grid_w: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.shape != (self.grid_h * self.grid_w,):
            raise DegenerateK(
                f"labels shape {labels.shape} != grid {self.grid_h}x{self.grid_w}"
            )
        if labels.min() < 0 or labels.max() >= self.k:
            raise DegenerateK(f"labels outside [0, {self.k})")
        if np.unique(labels).size != self.k:
            raise DegenerateK("some cluster id has no member pixels")
        object.__setattr__(self, "labels", labels)

    def label_grid(self) -> np.ndarray:
        return self.labels.reshape(self.grid_h, self.grid_w)


def build_similarity(a: AffinityMap) -> np.ndarray:
    """Nonnegative graph weights: negatives clamped to 0, zero diagonal.

    Clamping (rather than affine-mapping to [0, 1]) keeps anti-correlated
    pixels disconnected. Raises IsolatedVertex if a row has no edges left.
    """
    w = np.clip(a.values, 0.0, None)
    np.fill_diagonal(w, 0.0)
    degrees = w.sum(axis=1)
    dead = np.flatnonzero(degrees <= 0.0)
    if dead.size:
        raise IsolatedVertex(int(dead[0]))
    return w


def laplacian_eigenpairs(
    w: np.ndarray, k: int, eig_tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    """The k algebraically smallest eigenpairs of L_sym.

    Returns (eigenvalues (k,), eigenvectors (n, k)) with a residual check
    ||L v - lambda v||_inf <= eig_tol per pair.
    """
    n = w.shape[0]
    if not 2 <= k < n:
        raise DegenerateK(f"need 2 <= k < n, got k={k}, n={n}")
    degrees = w.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lsym = np.eye(n) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    lsym = (lsym + lsym.T) / 2.0
    try:
        vals, vecs = scipy.linalg.eigh(lsym, subset_by_index=[0, k - 1])
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigFailure(f"dense eigensolver failed: {exc}") from exc
    residual = np.abs(lsym @ vecs - vecs * vals[None, :]).max()
    if residual > eig_tol:
        raise EigFailure(f"eigen residual {residual:.3e} exceeds tol {eig_tol:.3e}")
    return vals, vecs


def spectral_embed(w: np.ndarray, k: int, eig_tol: float = 1e-8) -> np.ndarray:
    """Row-normalized k-dimensional spectral embedding of the graph."""
    _, vecs = laplacian_eigenpairs(w, k, eig_tol)
    norms = np.linalg.norm(vecs, axis=1)
    keep = norms > _ROW_NORM_EPS
    out = np.zeros_like(vecs)
    out[keep] = vecs[keep] / norms[keep, None]
    return out


def kmeans(points: np.ndarray, k: int, cfg: SpectralConfig) -> np.ndarray:
    """Lloyd's algorithm, k-means++ init, best of cfg.kmeans_restarts by WCSS.

    Fully deterministic: restart r uses the r-th output of a splitmix64
    stream seeded with cfg.seed, and ties in WCSS go to the earlier restart.
    Empty clusters are repaired by reassigning the point currently farthest
    from its center.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise DegenerateK(f"kmeans needs n >= k, got n={n}, k={k}")
    best_labels = None
    best_wcss = np.inf
    state = cfg.seed & ((1 << 64) - 1)
    for _ in range(cfg.kmeans_restarts):
        sub_seed, state = splitmix64(state)
        rng = np.random.default_rng(sub_seed)
        centers = _kmeans_pp_init(points, k, rng)
        labels, wcss = _lloyd(points, centers, k, cfg.kmeans_max_iter)
        if wcss < best_wcss:
            best_wcss = wcss
            best_labels = labels
    return best_labels


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return centers


def _lloyd(
    points: np.ndarray, centers: np.ndarray, k: int, max_iter: int
) -> tuple[np.ndarray, float]:
    n = points.shape[0]
    prev = None
    labels = None
    for _ in range(max_iter):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        _repair_empty(labels, dists[np.arange(n), labels], k)
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels
        centers = np.stack([points[labels == cid].mean(axis=0) for cid in range(k)])
    centers = np.stack([points[labels == cid].mean(axis=0) for cid in range(k)])
    wcss = float(((points - centers[labels]) ** 2).sum())
    return labels, wcss


def _repair_empty(labels: np.ndarray, own: np.ndarray, k: int) -> None:
    """Give every empty cluster one point, farthest-from-center first."""
    for cid in range(k):
        if not np.any(labels == cid):
            far = int(own.argmax())
            labels[far] = cid
            own[far] = -1.0
    # a steal can re-empty a singleton donor (only with duplicate points);
    # fall back to taking from the largest cluster, which never empties it
    for cid in range(k):
        if not np.any(labels == cid):
            counts = np.bincount(labels, minlength=k)
            donor = int(counts.argmax())
            labels[int(np.flatnonzero(labels == donor)[0])] = cid


def spectral_cluster(a: AffinityMap, k: int, cfg: SpectralConfig) -> ClusterResult:
    """Cluster the affinity map into k groups; deterministic given cfg.seed."""
    w = build_similarity(a)
    embedding = spectral_embed(w, k, cfg.eig_tol)
    labels = kmeans(embedding, k, cfg)
    return ClusterResult(k=k, labels=labels, grid_h=a.grid_h, grid_w=a.grid_w)
