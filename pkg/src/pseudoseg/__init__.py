"""Pseudo segmentation labels and K-shot training episodes from unlabeled images."""

from .affinity import AffinityMap, compute_affinity
from .config import RunConfig, config_from_dict, config_to_dict, load_config, save_config
from .crf import CrfParams, UnaryField, labels_to_unary, mean_field_refine, upsample_labels
from .episodes import (
    ConcreteTransform,
    Episode,
    TransformConfig,
    apply_transform,
    generate_episode,
    sample_transform,
)
from .feature_io import (
    FeatureMap,
    load_feature_map,
    load_image,
    load_mask,
    save_feature_map,
    save_image,
    save_mask,
)
from .metrics import ConfusionCounts, confusion, fb_iou, iou, mean_iou_with_exclusions, miou
from .pseudolabel import (
    PgmConfig,
    PseudoLabel,
    generate_pseudo_labels,
    generate_pseudo_labels_with_audit,
)
from .selection import ChScore, RankedCluster, centrality_rank, ch_score, pick_top_t, select_best_k
from .spectral import (
    ClusterResult,
    SpectralConfig,
    build_similarity,
    kmeans,
    laplacian_eigenpairs,
    spectral_cluster,
    spectral_embed,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMap",
    "ChScore",
    "ClusterResult",
    "ConcreteTransform",
    "ConfusionCounts",
    "CrfParams",
    "Episode",
    "FeatureMap",
    "PgmConfig",
    "PseudoLabel",
    "RankedCluster",
    "RunConfig",
    "SpectralConfig",
    "TransformConfig",
    "UnaryField",
    "apply_transform",
    "build_similarity",
    "centrality_rank",
    "ch_score",
    "compute_affinity",
    "config_from_dict",
    "config_to_dict",
    "confusion",
    "fb_iou",
    "generate_episode",
    "generate_pseudo_labels",
    "generate_pseudo_labels_with_audit",
    "iou",
    "kmeans",
    "labels_to_unary",
    "laplacian_eigenpairs",
    "load_config",
    "load_feature_map",
    "load_image",
    "load_mask",
    "mean_field_refine",
    "mean_iou_with_exclusions",
    "miou",
    "pick_top_t",
    "sample_transform",
    "save_config",
    "save_feature_map",
    "save_image",
    "save_mask",
    "select_best_k",
    "spectral_cluster",
    "spectral_embed",
    "upsample_labels",
]
