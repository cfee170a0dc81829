"""Fully-connected CRF refinement of hard labels at image resolution.

Mean-field inference with two Gaussian pairwise kernels and Potts
compatibility:

    appearance: exp(-|pos_i - pos_j|^2 / (2*theta_alpha^2)
                    - |rgb_i - rgb_j|^2 / (2*theta_beta^2))
    smoothness: exp(-|pos_i - pos_j|^2 / (2*theta_gamma^2))

Positions are integer pixel indices (row, col); colors are 0..255 RGB. The
message for class l at pixel i is the literal kernel sum over j != i of
Q_j(l), weighted by w_appearance / w_smoothness, and the Potts penalty for
label l is the total message mass on the other labels. Updates are
Jacobi-style: every pixel reads only the previous iterate, so results are
independent of pixel order.

Small inputs (<= EXACT_PIXEL_LIMIT pixels) are filtered with exact dense
kernel matrices. Larger inputs use the standard lattice approximation: the
smoothness term becomes a separable spatial Gaussian convolution and the
appearance term a 5-D bilateral grid (splat with multilinear weights, blur
each axis with an unnormalized unit-sigma Gaussian, slice back). The grid
slightly widens and attenuates the true kernel, which is the usual accepted
trade-off of this approximation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DegenerateK, DimMismatch
from .spectral import ClusterResult

EXACT_PIXEL_LIMIT = 4096


@dataclass(frozen=True)
class CrfParams:
    w_appearance: float = 10.0
    theta_alpha: float = 80.0
    theta_beta: float = 13.0
    w_smoothness: float = 3.0
    theta_gamma: float = 3.0
    iterations: int = 10
    label_smooth_eps: float = 0.1

    def __post_init__(self):
        if self.w_appearance < 0 or self.w_smoothness < 0:
            raise ValueError("kernel weights must be >= 0")
        if min(self.theta_alpha, self.theta_beta, self.theta_gamma) <= 0:
            raise ValueError("kernel bandwidths must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.label_smooth_eps < 1.0:
            raise ValueError("label_smooth_eps must be in [0, 1)")


@dataclass
class UnaryField:
    """Per-pixel probability vectors over k classes, rows summing to 1."""

    probs: np.ndarray  # (h, w, k) float64

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[2] < 2:
            raise DimMismatch(f"unary must be (h, w, k>=2), got {probs.shape}")
        if probs.min() < 0.0:
            raise ValueError("unary probabilities must be >= 0")
        if np.abs(probs.sum(axis=2) - 1.0).max() > 1e-6:
            raise ValueError("unary rows must sum to 1 within 1e-6")
        self.probs = probs

    @property
    def num_classes(self) -> int:
        return self.probs.shape[2]

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]


def upsample_labels(c: ClusterResult, image_h: int, image_w: int) -> np.ndarray:
    """Nearest-neighbor upsampling of the grid label map to image size."""
    if image_h < c.grid_h or image_w < c.grid_w:
        raise DimMismatch(
            f"image {image_h}x{image_w} smaller than grid {c.grid_h}x{c.grid_w}"
        )
    grid = c.label_grid()
    rows = (np.arange(image_h) * c.grid_h) // image_h
    cols = (np.arange(image_w) * c.grid_w) // image_w
    return grid[rows[:, None], cols[None, :]]


def labels_to_unary(hard_labels: np.ndarray, k: int, eps: float) -> UnaryField:
    """Smoothed one-hot field: 1-eps on the own label, eps/(k-1) elsewhere."""
    if k < 2:
        raise DegenerateK(f"need k >= 2, got {k}")
    hard_labels = np.asarray(hard_labels)
    if hard_labels.min() < 0 or hard_labels.max() >= k:
        raise DegenerateK(f"labels outside [0, {k})")
    h, w = hard_labels.shape
    off = eps / (k - 1)
    probs = np.full((h, w, k), off, dtype=np.float64)
    own = hard_labels[..., None]
    np.put_along_axis(probs, own, 1.0 - off * (k - 1), axis=2)
    # nudge the own-label mass until every float row sum is exactly 1
    for _ in range(4):
        residual = 1.0 - probs.sum(axis=2, keepdims=True)
        if not residual.any():
            break
        np.put_along_axis(
            probs, own, np.take_along_axis(probs, own, axis=2) + residual, axis=2
        )
    return UnaryField(probs)


def mean_field_refine(
    img: np.ndarray,
    u: UnaryField,
    p: CrfParams,
    mode: str = "auto",
) -> tuple[UnaryField, np.ndarray]:
    """Run mean-field updates; returns (refined field, argmax labels).

    ``mode`` is "auto" (exact under EXACT_PIXEL_LIMIT pixels, lattice above),
    "exact", or "lattice". Argmax ties go to the smaller class id.
    """
    h, w, k = u.probs.shape
    if img.shape[:2] != (h, w):
        raise DimMismatch(f"image {img.shape[:2]} does not match unary {(h, w)}")
    if mode not in ("auto", "exact", "lattice"):
        raise ValueError(f"unknown mode {mode!r}")
    exact = mode == "exact" or (mode == "auto" and h * w <= EXACT_PIXEL_LIMIT)
    pairwise = _ExactPairwise(img, p) if exact else _LatticePairwise(img, p)
    unary = u.probs
    q = unary.copy()
    for _ in range(p.iterations):
        msg = pairwise.messages(q)
        penalty = msg.sum(axis=2, keepdims=True) - msg
        penalty -= penalty.min(axis=2, keepdims=True)
        candidate = unary * np.exp(-penalty)
        total = candidate.sum(axis=2, keepdims=True)
        dead = total[..., 0] <= 0.0
        if np.any(dead):
            # zero-eps unaries can underflow in a saturated update; keep the
            # least-penalized class for those pixels
            flat_c = candidate.reshape(-1, k)
            flat_p = penalty.reshape(-1, k)
            rows = np.flatnonzero(dead.ravel())
            flat_c[rows] = 0.0
            flat_c[rows, flat_p[rows].argmin(axis=1)] = 1.0
            total = candidate.sum(axis=2, keepdims=True)
        q = candidate / total
    return UnaryField(q), q.argmax(axis=2)


class _ExactPairwise:
    """Dense kernel matrices; literal message sums. O(n^2) memory and time."""

    def __init__(self, img: np.ndarray, p: CrfParams):
        h, w = img.shape[:2]
        ys, xs = np.indices((h, w))
        pos = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
        rgb = img.reshape(-1, 3).astype(np.float64)
        pos2 = _pairwise_sq_dists(pos)
        col2 = _pairwise_sq_dists(rgb)
        k_app = np.exp(
            -pos2 / (2.0 * p.theta_alpha**2) - col2 / (2.0 * p.theta_beta**2)
        )
        k_sm = np.exp(-pos2 / (2.0 * p.theta_gamma**2))
        np.fill_diagonal(k_app, 0.0)
        np.fill_diagonal(k_sm, 0.0)
        self._kernel = p.w_appearance * k_app + p.w_smoothness * k_sm
        self._shape = (h, w)

    def messages(self, q: np.ndarray) -> np.ndarray:
        h, w = self._shape
        flat = q.reshape(h * w, -1)
        return (self._kernel @ flat).reshape(h, w, -1)


class _LatticePairwise:
    """Separable spatial Gaussian plus 5-D bilateral grid approximation."""

    def __init__(self, img: np.ndarray, p: CrfParams):
        self._p = p
        self._grid = _BilateralGrid(img, p.theta_alpha, p.theta_beta)
        radius = max(1, int(np.ceil(4.0 * p.theta_gamma)))
        self._sm_taps = np.exp(
            -np.arange(-radius, radius + 1) ** 2 / (2.0 * p.theta_gamma**2)
        )

    def messages(self, q: np.ndarray) -> np.ndarray:
        p = self._p
        out = np.empty_like(q)
        for l in range(q.shape[2]):
            plane = q[..., l]
            app = self._grid.filter(plane.ravel()).reshape(plane.shape) - plane
            sm = correlate1d(plane, self._sm_taps, axis=0, mode="constant")
            sm = correlate1d(sm, self._sm_taps, axis=1, mode="constant")
            sm -= plane  # remove the k(i, i) = 1 self term
            out[..., l] = p.w_appearance * app + p.w_smoothness * sm
        return out


class _BilateralGrid:
    """Splat / blur / slice filter over (y, x, r, g, b) / (ta, ta, tb, tb, tb).

    Approximates v_i -> sum_j exp(-|f_i - f_j|^2 / 2) v_j with unit-sigma
    cells. Corner indices and weights depend only on the image, so they are
    precomputed once and reused across classes and iterations.
    """

    _PAD = 3

    def __init__(self, img: np.ndarray, theta_alpha: float, theta_beta: float):
        h, w = img.shape[:2]
        ys, xs = np.indices((h, w))
        feats = np.stack(
            [
                ys.ravel() / theta_alpha,
                xs.ravel() / theta_alpha,
                img[..., 0].ravel() / theta_beta,
                img[..., 1].ravel() / theta_beta,
                img[..., 2].ravel() / theta_beta,
            ],
            axis=1,
        )
        coords = feats - feats.min(axis=0) + self._PAD
        base = np.floor(coords).astype(np.int64)
        frac = coords - base
        self._shape = tuple(base.max(axis=0) + 2 + self._PAD)
        self._cells = int(np.prod(self._shape))
        idx_list = []
        weight_list = []
        for corner in itertools.product((0, 1), repeat=5):
            offset = np.array(corner, dtype=np.int64)
            cell = base + offset
            weight = np.where(offset[None, :] == 1, frac, 1.0 - frac).prod(axis=1)
            idx_list.append(np.ravel_multi_index(tuple(cell.T), self._shape))
            weight_list.append(weight)
        self._indices = np.stack(idx_list).astype(np.int64)
        self._weights = np.stack(weight_list)
        d = np.arange(-2, 3, dtype=np.float64)
        self._blur_taps = np.exp(-(d**2) / 2.0)

    def filter(self, values: np.ndarray) -> np.ndarray:
        splat = np.bincount(
            self._indices.ravel(),
            weights=(self._weights * values[None, :]).ravel(),
            minlength=self._cells,
        ).reshape(self._shape)
        for axis in range(5):
            splat = correlate1d(splat, self._blur_taps, axis=axis, mode="constant")
        flat = splat.ravel()
        return (flat[self._indices] * self._weights).sum(axis=0)


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return (diff**2).sum(axis=2)
