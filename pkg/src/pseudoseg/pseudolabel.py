"""End-to-end pseudo-label generation for one image.

Stages: cosine affinity over the feature grid, spectral clustering swept
over k in [k_min, k_max] with CH-score selection, nearest-neighbor
upsampling to image resolution, dense-CRF refinement, centrality ranking,
and top-t selection with a cluster-size filter. Each selected cluster
becomes one binary foreground mask.

Degenerate inputs abort the image with SkippedImage wrapping the cause;
batch drivers log and move on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affinity import compute_affinity
from .crf import CrfParams, labels_to_unary, mean_field_refine, upsample_labels
from .errors import (
    AllDegenerate,
    DimMismatch,
    IsolatedVertex,
    SkippedImage,
    ZeroNormPixel,
)
from .feature_io import FeatureMap, validate_image
from .selection import RankedCluster, centrality_rank, pick_top_t, select_best_k
from .spectral import SpectralConfig


@dataclass(frozen=True)
class PgmConfig:
    """Pipeline constants; defaults follow the reference configuration."""

    input_size: int = 672
    k_min: int = 3
    k_max: int = 5
    top_t: int = 2
    min_frac: float = 0.01
    max_frac: float = 0.95
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    crf: CrfParams = field(default_factory=CrfParams)

    def __post_init__(self):
        if not 2 <= self.k_min <= self.k_max:
            raise ValueError(f"need 2 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if self.top_t < 1:
            raise ValueError("top_t must be >= 1")
        if not 0.0 <= self.min_frac <= self.max_frac <= 1.0:
            raise ValueError("need 0 <= min_frac <= max_frac <= 1")
        if self.input_size < 1:
            raise ValueError("input_size must be positive")


@dataclass(frozen=True)
class PseudoLabel:
    """One binary foreground mask plus its provenance."""

    mask: np.ndarray  # (h, w) uint8 {0, 1}, at image resolution
    source_image_id: str
    cluster_id: int
    d_q: float  # mean member-pixel distance to the image center
    ch_of_best: float  # CH score of the winning clustering
    k_best: int

    def __post_init__(self):
        fg = int(self.mask.sum())
        if fg == 0 or fg == self.mask.size:
            raise ValueError("pseudo-label mask must have foreground and background")


@dataclass
class PgmAudit:
    """Per-image diagnostics emitted alongside the masks."""

    image_id: str
    k_best: int = 0
    ch_scores: dict[int, float] = field(default_factory=dict)
    ranking: list[RankedCluster] = field(default_factory=list)
    statuses: dict[int, str] = field(default_factory=dict)

    def to_sidecar(self) -> str:
        lines = [f"image_id={self.image_id}", f"k_best={self.k_best}"]
        for k in sorted(self.ch_scores):
            lines.append(f"ch_k{k}={self.ch_scores[k]:.9g}")
        for r in self.ranking:
            cid = r.cluster_id
            lines.append(f"cluster_{cid}_dq={r.distance:.9g}")
            lines.append(f"cluster_{cid}_pixels={r.pixel_count}")
            lines.append(f"cluster_{cid}_status={self.statuses.get(cid, 'unknown')}")
        return "\n".join(lines) + "\n"


def generate_pseudo_labels(
    img: np.ndarray, f: FeatureMap, cfg: PgmConfig, image_id: str = ""
) -> list[PseudoLabel]:
    labels, _ = generate_pseudo_labels_with_audit(img, f, cfg, image_id)
    return labels


def generate_pseudo_labels_with_audit(
    img: np.ndarray, f: FeatureMap, cfg: PgmConfig, image_id: str = ""
) -> tuple[list[PseudoLabel], PgmAudit]:
    """Run the full per-image pipeline; returns up to cfg.top_t labels.

    The image must already be resized to input_size x input_size and the
    feature map must come from exactly that resized image.
    """
    validate_image(img)
    h, w = img.shape[:2]
    if (h, w) != (cfg.input_size, cfg.input_size):
        raise DimMismatch(
            f"image is {h}x{w}, config expects {cfg.input_size}x{cfg.input_size}"
        )
    audit = PgmAudit(image_id=image_id)
    try:
        aff = compute_affinity(f)
        best, scores = select_best_k(aff, f, cfg.k_min, cfg.k_max, cfg.spectral)
    except (ZeroNormPixel, IsolatedVertex, AllDegenerate) as exc:
        raise SkippedImage(exc) from exc
    audit.k_best = best.k
    audit.ch_scores = {k: s.value for k, s in scores.items()}

    hard = upsample_labels(best, h, w)
    unary = labels_to_unary(hard, best.k, cfg.crf.label_smooth_eps)
    _, refined_labels = mean_field_refine(img, unary, cfg.crf)

    ranking = centrality_rank(refined_labels)
    audit.ranking = ranking
    chosen = pick_top_t(ranking, cfg.top_t, cfg.min_frac, cfg.max_frac, h * w)
    lo = cfg.min_frac * h * w
    hi = cfg.max_frac * h * w
    for r in ranking:
        if r.cluster_id in chosen:
            audit.statuses[r.cluster_id] = "selected"
        elif not lo <= r.pixel_count <= hi:
            audit.statuses[r.cluster_id] = "size_filtered"
        else:
            audit.statuses[r.cluster_id] = "below_top_t"
    if not chosen:
        raise SkippedImage("no cluster passed the size filter")

    by_id = {r.cluster_id: r for r in ranking}
    ch_best = scores[best.k].value
    out = []
    for cid in chosen:
        out.append(
            PseudoLabel(
                mask=(refined_labels == cid).astype(np.uint8),
                source_image_id=image_id,
                cluster_id=cid,
                d_q=by_id[cid].distance,
                ch_of_best=ch_best,
                k_best=best.k,
            )
        )
    return out, audit
