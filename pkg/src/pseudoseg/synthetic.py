"""Planted-disc fixtures: an image, its feature map, and ground truth.

Used by the end-to-end self-check (`synth-check`) and the test suite. The
scene is a centered high-contrast disc on a background whose feature
vectors split into left and right groups, giving three well-separated
feature clusters whose true boundary is recoverable from the image colors.
"""

from __future__ import annotations

import numpy as np

from .feature_io import FeatureMap

DISC_RADIUS_FRAC = 0.3

_FG_COLOR = (206, 92, 64)
_BG_COLOR = (44, 62, 158)


def _disc_membership(h: int, w: int, size: int, radius_frac: float) -> np.ndarray:
    """Boolean disc mask on an h x w grid covering a size x size image."""
    ys = (np.arange(h) + 0.5) * (size / h) - size / 2.0
    xs = (np.arange(w) + 0.5) * (size / w) - size / 2.0
    rr = ys[:, None] ** 2 + xs[None, :] ** 2
    return rr < (radius_frac * size) ** 2


def disc_mask(size: int, radius_frac: float = DISC_RADIUS_FRAC) -> np.ndarray:
    """Ground-truth {0,1} mask of the planted disc at image resolution."""
    return _disc_membership(size, size, size, radius_frac).astype(np.uint8)


def disc_image(
    size: int,
    radius_frac: float = DISC_RADIUS_FRAC,
    noise: float = 4.0,
    seed: int = 0,
) -> np.ndarray:
    """High-contrast RGB rendering of the disc with mild pixel noise."""
    inside = _disc_membership(size, size, size, radius_frac)
    img = np.where(inside[..., None], _FG_COLOR, _BG_COLOR).astype(np.float64)
    rng = np.random.default_rng(seed)
    img += rng.normal(0.0, noise, size=img.shape)
    return np.rint(np.clip(img, 0, 255)).astype(np.uint8)


def disc_feature_map(
    grid: int = 21,
    channels: int = 8,
    size: int = 672,
    radius_frac: float = DISC_RADIUS_FRAC,
    noise_sigma: float = 0.1,
    seed: int = 0,
) -> FeatureMap:
    """Feature grid with disc / background-left / background-right encoding.

    Three disjoint channel groups carry the region indicators; Gaussian
    noise of the given sigma is added everywhere.
    """
    if channels < 3:
        raise ValueError("need at least 3 channels for the region encoding")
    inside = _disc_membership(grid, grid, size, radius_frac)
    xs = np.arange(grid)[None, :].repeat(grid, axis=0)
    left = ~inside & (xs < grid / 2.0)
    right = ~inside & ~(xs < grid / 2.0)
    bounds = np.linspace(0, channels, 4).astype(int)
    data = np.zeros((channels, grid, grid), dtype=np.float64)
    for group, region in enumerate((inside, left, right)):
        data[bounds[group] : bounds[group + 1], region] = 1.0
    rng = np.random.default_rng(seed)
    data += rng.normal(0.0, noise_sigma, size=data.shape)
    return FeatureMap(data.astype(np.float32))
