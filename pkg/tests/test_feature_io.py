import numpy as np
import pytest

from pseudoseg.errors import BadMagic, DimMismatch, NonBinaryPixel, NonFiniteValue
from pseudoseg.feature_io import (
    FeatureMap,
    load_feature_map,
    load_image,
    load_mask,
    save_feature_map,
    save_image,
    save_mask,
)

# exact serialization of FeatureMap{c=2, h=1, w=1, [1.0, 2.0]}
GOLDEN_BYTES = (
    b"FMAP"
    + (1).to_bytes(4, "little")
    + (2).to_bytes(4, "little")
    + (1).to_bytes(4, "little")
    + (1).to_bytes(4, "little")
    + np.array([1.0, 2.0], dtype="<f4").tobytes()
)


def test_golden_bytes(tmp_path):
    path = tmp_path / "tiny.fmap"
    save_feature_map(FeatureMap(np.array([[[1.0]], [[2.0]]], dtype=np.float32)), path)
    assert path.read_bytes() == GOLDEN_BYTES


def test_smallest_well_formed_file(tmp_path):
    path = tmp_path / "tiny.fmap"
    path.write_bytes(GOLDEN_BYTES)
    fmap = load_feature_map(path)
    assert (fmap.channels, fmap.height, fmap.width) == (2, 1, 1)
    assert fmap.data.ravel().tolist() == [1.0, 2.0]


def test_feature_map_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    fmap = FeatureMap(rng.normal(size=(8, 5, 7)).astype(np.float32))
    path = tmp_path / "f.fmap"
    save_feature_map(fmap, path)
    again = load_feature_map(path)
    assert np.array_equal(again.data, fmap.data)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.fmap"
    path.write_bytes(b"NOPE" + GOLDEN_BYTES[4:])
    with pytest.raises(BadMagic):
        load_feature_map(path)


def test_bad_version(tmp_path):
    path = tmp_path / "bad.fmap"
    path.write_bytes(GOLDEN_BYTES[:4] + (9).to_bytes(4, "little") + GOLDEN_BYTES[8:])
    with pytest.raises(BadMagic):
        load_feature_map(path)


def test_short_payload_is_dim_mismatch(tmp_path):
    path = tmp_path / "short.fmap"
    path.write_bytes(GOLDEN_BYTES[:-4])  # one value missing
    with pytest.raises(DimMismatch):
        load_feature_map(path)


def test_trailing_bytes_is_dim_mismatch(tmp_path):
    path = tmp_path / "long.fmap"
    path.write_bytes(GOLDEN_BYTES + b"\x00\x00\x00\x00")
    with pytest.raises(DimMismatch):
        load_feature_map(path)


def test_non_finite_payload(tmp_path):
    path = tmp_path / "nan.fmap"
    payload = np.array([1.0, np.nan], dtype="<f4").tobytes()
    path.write_bytes(GOLDEN_BYTES[:20] + payload)
    with pytest.raises(NonFiniteValue):
        load_feature_map(path)
    with pytest.raises(NonFiniteValue):
        FeatureMap(np.array([[[np.inf]], [[0.0]]], dtype=np.float32))


def test_mask_round_trip_all_zero(tmp_path):
    mask = np.zeros((4, 4), dtype=np.uint8)
    path = tmp_path / "m.png"
    save_mask(mask, path)
    assert np.array_equal(load_mask(path), mask)


def test_mask_round_trip_checkerboard(tmp_path):
    mask = np.indices((2, 2)).sum(axis=0).astype(np.uint8) % 2
    path = tmp_path / "m.png"
    save_mask(mask, path)
    again = load_mask(path)
    assert np.array_equal(again, mask)
    # saved-then-loaded-then-saved files are byte-identical
    path2 = tmp_path / "m2.png"
    save_mask(again, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_mask_non_binary_pixel(tmp_path):
    from PIL import Image

    path = tmp_path / "bad.png"
    Image.fromarray(np.full((3, 3), 7, dtype=np.uint8), mode="L").save(path)
    with pytest.raises(NonBinaryPixel):
        load_mask(path)


def test_save_mask_rejects_non_binary(tmp_path):
    with pytest.raises(NonBinaryPixel):
        save_mask(np.full((2, 2), 3, dtype=np.uint8), tmp_path / "x.png")


def test_image_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(6, 9, 3), dtype=np.uint8)
    path = tmp_path / "i.png"
    save_image(img, path)
    assert np.array_equal(load_image(path), img)


def test_exporter_shaped_file(tmp_path):
    # a stride-32 backbone on a 672x672 input gives a 21x21 grid
    rng = np.random.default_rng(2)
    fmap = FeatureMap(rng.normal(size=(32, 21, 21)).astype(np.float32))
    path = tmp_path / "e.fmap"
    save_feature_map(fmap, path)
    again = load_feature_map(path)
    assert (again.height, again.width) == (672 // 32, 672 // 32)
    assert np.isfinite(again.data).all()
