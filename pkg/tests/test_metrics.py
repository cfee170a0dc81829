import numpy as np
import pytest

from pseudoseg.errors import DimMismatch
from pseudoseg.metrics import (
    ConfusionCounts,
    confusion,
    fb_iou,
    iou,
    mean_iou_with_exclusions,
    miou,
)


def shifted_block_pair():
    """4x4 masks: a 2x2 block and the same block shifted by (1, 1)."""
    pred = np.zeros((4, 4), dtype=np.uint8)
    pred[0:2, 0:2] = 1
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[1:3, 1:3] = 1
    return pred, gt


def test_confusion_identity():
    gt = np.zeros((10, 10), dtype=np.uint8)
    gt[:2, :5] = 1
    c = confusion(gt, gt)
    assert (c.tp, c.fp, c.fn, c.tn) == (10, 0, 0, 90)
    assert c.total == 100


def test_confusion_all_zero_pred():
    gt = np.zeros((10, 10), dtype=np.uint8)
    gt[0, :10] = 1
    c = confusion(np.zeros_like(gt), gt)
    assert (c.tp, c.fn) == (0, 10)


def test_confusion_shifted_block():
    pred, gt = shifted_block_pair()
    c = confusion(pred, gt)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 3, 3, 9)


def test_confusion_dim_mismatch():
    with pytest.raises(DimMismatch):
        confusion(np.zeros((2, 2)), np.zeros((2, 3)))


def test_iou_cases():
    pred, gt = shifted_block_pair()
    assert iou(confusion(gt, gt)) == 1.0
    disjoint = np.zeros_like(gt)
    disjoint[3, 3] = 1
    gt2 = np.zeros_like(gt)
    gt2[0, 0] = 1
    assert iou(confusion(disjoint, gt2)) == 0.0
    assert iou(confusion(pred, gt)) == 1 / 7


def test_iou_undefined_sentinel():
    empty = np.zeros((3, 3), dtype=np.uint8)
    assert iou(confusion(empty, empty)) is None


def test_iou_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = (rng.random((6, 6)) < 0.4).astype(np.uint8)
        b = (rng.random((6, 6)) < 0.4).astype(np.uint8)
        assert iou(confusion(a, b)) == iou(confusion(b, a))


def test_iou_monotone_in_correct_pixels():
    rng = np.random.default_rng(1)
    for _ in range(20):
        gt = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        pred = gt * (rng.random((8, 8)) < 0.6).astype(np.uint8)
        missing = np.argwhere((gt == 1) & (pred == 0))
        if missing.size == 0:
            continue
        before = iou(confusion(pred, gt)) or 0.0
        y, x = missing[0]
        pred2 = pred.copy()
        pred2[y, x] = 1
        after = iou(confusion(pred2, gt))
        assert after >= before


def test_miou():
    assert miou([0.7]) == 0.7
    assert miou([1.0, 0.0]) == 0.5
    with pytest.raises(ValueError):
        miou([])


def test_fb_iou_cases():
    pred, gt = shifted_block_pair()
    assert fb_iou(confusion(gt, gt)) == 1.0
    c = confusion(pred, gt)
    assert fb_iou(c) == (1 / 7 + 0.6) / 2
    # inverted prediction on a half/half image: no overlap either way
    half = np.zeros((4, 4), dtype=np.uint8)
    half[:2] = 1
    assert fb_iou(confusion(1 - half, half)) == 0.0


def test_fb_iou_range():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = (rng.random((5, 5)) < rng.random()).astype(np.uint8)
        b = (rng.random((5, 5)) < rng.random()).astype(np.uint8)
        value = fb_iou(confusion(a, b))
        if value is not None:
            assert 0.0 <= value <= 1.0


def test_fb_iou_undefined():
    empty = np.zeros((2, 2), dtype=np.uint8)
    assert fb_iou(confusion(empty, empty)) is None
    full = np.ones((2, 2), dtype=np.uint8)
    assert fb_iou(confusion(full, full)) is None


def test_mean_iou_with_exclusions():
    mean, excluded = mean_iou_with_exclusions([1.0, None, 0.5, None])
    assert mean == 0.75
    assert excluded == 2
    mean, excluded = mean_iou_with_exclusions([None])
    assert mean is None and excluded == 1


def test_counts_add():
    a = ConfusionCounts(1, 2, 3, 4)
    b = ConfusionCounts(10, 20, 30, 40)
    assert a + b == ConfusionCounts(11, 22, 33, 44)
