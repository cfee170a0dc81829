"""Model selection: score clusterings, pick the best k, rank by centrality.

The Calinski-Harabasz score is computed over the original pixel feature
vectors rather than the spectral embedding: the embedding dimension changes
with k, which would make scores across k incomparable, while the features
are k-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .affinity import AffinityMap
from .errors import AllDegenerate, DegenerateK, EigFailure, EmptyCluster
from .feature_io import FeatureMap
from .spectral import ClusterResult, SpectralConfig, spectral_cluster


@dataclass(frozen=True)
class ChScore:
    """Calinski-Harabasz value; ``perfect`` marks the tr(W)=0 sentinel."""

    value: float
    perfect: bool = False


@dataclass(frozen=True)
class RankedCluster:
    cluster_id: int
    distance: float  # mean euclidean distance of member pixels to image center
    pixel_count: int


def ch_score(points: np.ndarray, labels: np.ndarray, k: int) -> ChScore:
    """(tr(B)/tr(W)) * (n-k)/(k-1) from within/between scatter traces.

    Returns ChScore(+inf, perfect=True) when the within-cluster scatter
    vanishes (perfectly separated or fully degenerate data).
    """
    if k < 2:
        raise DegenerateK(f"need k >= 2, got {k}")
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    if n <= k:
        raise DegenerateK(f"need more points than clusters, got n={n}, k={k}")
    overall = points.mean(axis=0)
    tr_w = 0.0
    tr_b = 0.0
    for q in range(k):
        members = points[labels == q]
        if members.shape[0] == 0:
            raise EmptyCluster(f"cluster {q} has no points")
        center = members.mean(axis=0)
        tr_w += float(((members - center) ** 2).sum())
        tr_b += members.shape[0] * float(((center - overall) ** 2).sum())
    if tr_w == 0.0:
        return ChScore(value=math.inf, perfect=True)
    return ChScore(value=(tr_b / tr_w) * (n - k) / (k - 1))


def select_best_k(
    a: AffinityMap,
    fmap: FeatureMap,
    k_min: int,
    k_max: int,
    cfg: SpectralConfig,
) -> tuple[ClusterResult, dict[int, ChScore]]:
    """Cluster for every k in [k_min, k_max] and keep the highest CH score.

    Ties break toward smaller k. Per-k eigensolver or scoring degeneracies
    are tolerated as long as one k succeeds; if all fail, AllDegenerate.
    Input-level degeneracies (zero-norm pixels, isolated vertices) propagate
    immediately since no k can survive them.
    """
    if not 2 <= k_min <= k_max:
        raise DegenerateK(f"need 2 <= k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max >= a.n:
        raise DegenerateK(f"k_max={k_max} must be < pixel count {a.n}")
    points = fmap.data.reshape(fmap.channels, -1).T.astype(np.float64)
    scores: dict[int, ChScore] = {}
    failures: dict[int, str] = {}
    best: ClusterResult | None = None
    best_value = -math.inf
    for k in range(k_min, k_max + 1):
        try:
            result = spectral_cluster(a, k, cfg)
            score = ch_score(points, result.labels, k)
        except (EigFailure, DegenerateK, EmptyCluster) as exc:
            failures[k] = str(exc)
            continue
        scores[k] = score
        if score.value > best_value:
            best_value = score.value
            best = result
    if best is None:
        raise AllDegenerate(f"every k in [{k_min}, {k_max}] failed: {failures}")
    return best, scores


def centrality_rank(label_map: np.ndarray) -> list[RankedCluster]:
    """Rank clusters of a per-pixel label map by mean distance to the center.

    Pixel x uses its center (row + 0.5, col + 0.5); the image center is the
    exact geometric center (h/2, w/2). Sorted ascending by distance, ties by
    cluster id.
    """
    label_map = np.asarray(label_map)
    if label_map.ndim != 2 or label_map.size == 0:
        raise DegenerateK(f"label map must be a nonempty 2-D array, got {label_map.shape}")
    h, w = label_map.shape
    ys = (np.arange(h) + 0.5) - h / 2.0
    xs = (np.arange(w) + 0.5) - w / 2.0
    dist = np.sqrt(ys[:, None] ** 2 + xs[None, :] ** 2)
    ranked = []
    for cid in np.unique(label_map):
        members = label_map == cid
        ranked.append(
            RankedCluster(
                cluster_id=int(cid),
                distance=float(dist[members].mean()),
                pixel_count=int(members.sum()),
            )
        )
    ranked.sort(key=lambda r: (r.distance, r.cluster_id))
    return ranked


def pick_top_t(
    ranking: list[RankedCluster],
    t: int,
    min_frac: float,
    max_frac: float,
    total_pixels: int,
) -> list[int]:
    """First t ranked cluster ids whose size lies in [min_frac, max_frac].

    May return fewer than t (possibly none); near-empty or near-full masks
    carry no figure/ground signal and are dropped.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    lo = min_frac * total_pixels
    hi = max_frac * total_pixels
    kept = [r.cluster_id for r in ranking if lo <= r.pixel_count <= hi]
    return kept[:t]
