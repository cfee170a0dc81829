"""Segmentation evaluation: per-class IoU, mIoU, FB-IoU."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Pixelwise counts with foreground = 1."""
    if pred.shape != gt.shape:
        raise DimMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    p = pred.astype(bool)
    g = gt.astype(bool)
    return ConfusionCounts(
        tp=int((p & g).sum()),
        fp=int((p & ~g).sum()),
        fn=int((~p & g).sum()),
        tn=int((~p & ~g).sum()),
    )


def iou(c: ConfusionCounts) -> float | None:
    """tp / (tp + fp + fn); None when the union is empty (undefined)."""
    union = c.tp + c.fp + c.fn
    if union == 0:
        return None
    return c.tp / union


def miou(per_class_ious: Sequence[float]) -> float:
    """Arithmetic mean of per-class IoU values."""
    if len(per_class_ious) == 0:
        raise ValueError("miou needs at least one IoU value")
    return float(sum(per_class_ious) / len(per_class_ious))


def fb_iou(fg: ConfusionCounts) -> float | None:
    """Mean of foreground IoU and background IoU (tn / (tn + fn + fp)).

    None if either orientation is undefined.
    """
    fg_iou = iou(fg)
    bg_union = fg.tn + fg.fn + fg.fp
    if fg_iou is None or bg_union == 0:
        return None
    bg_iou = fg.tn / bg_union
    return (fg_iou + bg_iou) / 2.0


def mean_iou_with_exclusions(
    ious: Sequence[float | None],
) -> tuple[float | None, int]:
    """Mean over defined IoUs; undefined entries are excluded and counted.

    Silent 0 or 1 substitutions would bias averages, so exclusions are
    reported instead.
    """
    defined = [v for v in ious if v is not None]
    excluded = len(ious) - len(defined)
    if not defined:
        return None, excluded
    return miou(defined), excluded
