"""Pixel-pair cosine affinity over a feature grid.

Pixels are flattened row-major (index = row * width + col); every downstream
module inherits that convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroNormPixel
from .feature_io import FeatureMap

ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class AffinityMap:
    """Symmetric n x n matrix of cosine similarities, n = grid_h * grid_w."""

    values: np.ndarray  # (n, n) float64, entries in [-1, 1]
    grid_h: int
    grid_w: int

    @property
    def n(self) -> int:
        return self.values.shape[0]


def compute_affinity(fmap: FeatureMap) -> AffinityMap:
    """Cosine similarity between every pixel pair of a feature map.

    Raises ZeroNormPixel if any pixel's feature vector has norm <= 1e-12;
    callers typically skip the image.
    """
    c, h, w = fmap.data.shape
    vectors = fmap.data.reshape(c, h * w).T.astype(np.float64)
    gram = vectors @ vectors.T
    # dgemm output is symmetric only up to rounding; make it exact
    gram = (gram + gram.T) / 2.0
    norms = np.sqrt(np.diag(gram))
    degenerate = np.flatnonzero(norms <= ZERO_NORM_EPS)
    if degenerate.size:
        raise ZeroNormPixel(int(degenerate[0]))
    # normalizing the Gram matrix entrywise (rather than the vectors first)
    # keeps the result invariant to channel order whenever the dot products
    # themselves are exact
    values = gram / np.outer(norms, norms)
    return AffinityMap(values=values, grid_h=h, grid_w=w)
