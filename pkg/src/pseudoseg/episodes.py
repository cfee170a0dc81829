"""K-shot pseudo-episode synthesis via seeded stochastic transforms.

A transform pipeline has six stages applied in order, each included
independently with its own probability:

    random resized crop   p=1.0   scale [0.2, 1.0], aspect [3/4, 4/3]
    random rotation       p=0.4   degrees [-10, 10]
    color jitter          p=0.8   brightness/contrast/saturation 0.4, hue 0.1
    random grayscale      p=0.2
    gaussian blur         p=0.8   sigma [0.1, 2.0]
    horizontal flip       p=0.5

Sampling and application are split: `sample_transform` draws a concrete,
replayable parameter set from an rng, and `apply_transform` is a pure
function of (parameters, image, mask). Geometric stages hit image and mask
identically (bilinear vs. nearest interpolation); photometric stages touch
the image only. Output is always out_size x out_size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imageops
from .errors import DimMismatch, EpisodeDegenerate
from .pseudolabel import PseudoLabel
from .seeds import derive_seed


@dataclass(frozen=True)
class TransformConfig:
    out_size: int = 225
    p_crop: float = 1.0
    crop_scale: tuple[float, float] = (0.2, 1.0)
    crop_ratio: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    p_rotation: float = 0.4
    rotation_degrees: float = 10.0
    p_jitter: float = 0.8
    jitter_brightness: float = 0.4
    jitter_contrast: float = 0.4
    jitter_saturation: float = 0.4
    jitter_hue: float = 0.1
    p_grayscale: float = 0.2
    p_blur: float = 0.8
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    p_flip: float = 0.5
    min_fg: int = 16
    resample_attempts: int = 10

    def __post_init__(self):
        probs = (
            self.p_crop,
            self.p_rotation,
            self.p_jitter,
            self.p_grayscale,
            self.p_blur,
            self.p_flip,
        )
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("stage probabilities must lie in [0, 1]")
        if self.out_size < 1:
            raise ValueError("out_size must be positive")
        if self.min_fg < 1 or self.resample_attempts < 1:
            raise ValueError("min_fg and resample_attempts must be >= 1")

    @property
    def stage_probabilities(self) -> tuple[float, ...]:
        return (
            self.p_crop,
            self.p_rotation,
            self.p_jitter,
            self.p_grayscale,
            self.p_blur,
            self.p_flip,
        )


@dataclass(frozen=True)
class CropParams:
    scale: float  # target area fraction of the source
    ratio: float  # target aspect (width / height)
    u: float  # fractional horizontal placement in [0, 1)
    v: float  # fractional vertical placement in [0, 1)


@dataclass(frozen=True)
class JitterParams:
    order: tuple[int, ...]  # permutation of (brightness, contrast, sat, hue)
    brightness: float
    contrast: float
    saturation: float
    hue: float


@dataclass(frozen=True)
class ConcreteTransform:
    """A fully-parameterized pipeline; applying it twice gives equal output."""

    out_size: int
    crop: CropParams | None = None
    rotation: float | None = None
    jitter: JitterParams | None = None
    grayscale: bool = False
    blur_sigma: float | None = None
    hflip: bool = False


@dataclass(frozen=True)
class Episode:
    """One query view plus K support views of the same pseudo-labeled image."""

    query_image: np.ndarray
    query_mask: np.ndarray
    supports: tuple[tuple[np.ndarray, np.ndarray], ...]
    k_shot: int
    source_image_id: str
    pseudo_label_cluster_id: int
    seed: int


def sample_transform(cfg: TransformConfig, rng: np.random.Generator) -> ConcreteTransform:
    """Draw one concrete pipeline.

    Draw order is fixed (inclusion flag, then the stage's parameters if
    included), so a given rng state always produces the same transform.
    """
    crop = None
    if rng.random() < cfg.p_crop:
        lo, hi = cfg.crop_ratio
        crop = CropParams(
            scale=float(rng.uniform(*cfg.crop_scale)),
            ratio=float(np.exp(rng.uniform(np.log(lo), np.log(hi)))),
            u=float(rng.random()),
            v=float(rng.random()),
        )
    rotation = None
    if rng.random() < cfg.p_rotation:
        rotation = float(rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees))
    jitter = None
    if rng.random() < cfg.p_jitter:
        jitter = JitterParams(
            order=tuple(int(i) for i in rng.permutation(4)),
            brightness=float(
                rng.uniform(max(0.0, 1.0 - cfg.jitter_brightness), 1.0 + cfg.jitter_brightness)
            ),
            contrast=float(
                rng.uniform(max(0.0, 1.0 - cfg.jitter_contrast), 1.0 + cfg.jitter_contrast)
            ),
            saturation=float(
                rng.uniform(max(0.0, 1.0 - cfg.jitter_saturation), 1.0 + cfg.jitter_saturation)
            ),
            hue=float(rng.uniform(-cfg.jitter_hue, cfg.jitter_hue)),
        )
    grayscale = rng.random() < cfg.p_grayscale
    blur_sigma = None
    if rng.random() < cfg.p_blur:
        blur_sigma = float(rng.uniform(*cfg.blur_sigma))
    hflip = rng.random() < cfg.p_flip
    return ConcreteTransform(
        out_size=cfg.out_size,
        crop=crop,
        rotation=rotation,
        jitter=jitter,
        grayscale=grayscale,
        blur_sigma=blur_sigma,
        hflip=hflip,
    )


def _crop_rect(crop: CropParams, h: int, w: int) -> tuple[int, int, int, int]:
    """Deterministic crop rectangle; shrinks to fit when the sampled aspect
    would overflow the source (keeps the aspect, reduces the area)."""
    area = crop.scale * h * w
    cw = np.sqrt(area * crop.ratio)
    ch = np.sqrt(area / crop.ratio)
    fit = min(w / cw, h / ch, 1.0)
    cw = max(1, int(round(cw * fit)))
    ch = max(1, int(round(ch * fit)))
    cw = min(cw, w)
    ch = min(ch, h)
    top = int(round(crop.v * (h - ch)))
    left = int(round(crop.u * (w - cw)))
    return top, left, ch, cw


def apply_transform(
    t: ConcreteTransform, img: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Apply a concrete pipeline to an image/mask pair."""
    if img.shape[:2] != mask.shape:
        raise DimMismatch(f"image {img.shape[:2]} vs mask {mask.shape}")
    if t.crop is not None:
        top, left, ch, cw = _crop_rect(t.crop, *mask.shape)
        img, mask = imageops.crop_resize_pair(img, mask, top, left, ch, cw, t.out_size)
    else:
        img = imageops.resize_image(img, t.out_size, t.out_size)
        mask = imageops.resize_mask(mask, t.out_size, t.out_size)
    if t.rotation is not None:
        img, mask = imageops.rotate_pair(img, mask, t.rotation)
    if t.jitter is not None:
        j = t.jitter
        for op in j.order:
            if op == 0:
                img = imageops.adjust_brightness(img, j.brightness)
            elif op == 1:
                img = imageops.adjust_contrast(img, j.contrast)
            elif op == 2:
                img = imageops.adjust_saturation(img, j.saturation)
            else:
                img = imageops.adjust_hue(img, j.hue)
    if t.grayscale:
        img = imageops.to_grayscale(img)
    if t.blur_sigma is not None:
        img = imageops.gaussian_blur(img, t.blur_sigma)
    if t.hflip:
        img, mask = imageops.hflip_pair(img, mask)
    return img, mask


def generate_episode(
    img: np.ndarray,
    label: PseudoLabel,
    k_shot: int,
    cfg: TransformConfig,
    seed: int,
) -> Episode:
    """Make one K-shot episode: K+1 transformed views, one drawn as query.

    Each view index gets its own rng stream derived from (seed, view index,
    attempt), so changing K never perturbs earlier views. A view whose mask
    lands below cfg.min_fg foreground pixels is resampled up to
    cfg.resample_attempts times; if any view exhausts its attempts the whole
    episode is abandoned with EpisodeDegenerate.
    """
    if k_shot < 1:
        raise ValueError(f"k_shot must be >= 1, got {k_shot}")
    if int(label.mask.sum()) == 0:
        raise EpisodeDegenerate("pseudo-label mask has no foreground")
    views: list[tuple[np.ndarray, np.ndarray]] = []
    for view_idx in range(k_shot + 1):
        accepted = None
        for attempt in range(cfg.resample_attempts):
            rng = np.random.default_rng(derive_seed(seed, view_idx, attempt))
            t = sample_transform(cfg, rng)
            view_img, view_mask = apply_transform(t, img, label.mask)
            if int(view_mask.sum()) >= cfg.min_fg:
                accepted = (view_img, view_mask)
                break
        if accepted is None:
            raise EpisodeDegenerate(
                f"view {view_idx}: no visible foreground after "
                f"{cfg.resample_attempts} attempts"
            )
        views.append(accepted)
    query_rng = np.random.default_rng(derive_seed(seed, "query"))
    query_idx = int(query_rng.integers(k_shot + 1))
    supports = tuple(v for i, v in enumerate(views) if i != query_idx)
    return Episode(
        query_image=views[query_idx][0],
        query_mask=views[query_idx][1],
        supports=supports,
        k_shot=k_shot,
        source_image_id=label.source_image_id,
        pseudo_label_cluster_id=label.cluster_id,
        seed=seed,
    )
