"""File formats for feature maps, masks, and images.

Feature maps use a small binary container ("FMAP"), designed to be trivially
parseable from any language:

    offset  size     field
    0       4        magic, ASCII "FMAP"
    4       4        format version, little-endian u32 (currently 1)
    8       4        channel count c, little-endian u32
    12      4        height h, little-endian u32
    16      4        width w, little-endian u32
    20      4*c*h*w  payload, little-endian float32, channel-major
                     (flat index = (ch * h + row) * w + col)

Masks are 8-bit grayscale PNG with pixel values {0, 255} on disk and {0, 1}
in memory. Images are 8-bit RGB, row-major. All loaders fail loudly rather
than truncate or coerce.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    BadMagic,
    DimMismatch,
    IoFailure,
    NonBinaryPixel,
    NonFiniteValue,
)

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class FeatureMap:
    """Dense c x h x w feature tensor produced by a backbone on one image."""

    data: np.ndarray  # (c, h, w) float32

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimMismatch(f"feature map must be (c, h, w), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValue("feature map contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def save_feature_map(fmap: FeatureMap, path) -> None:
    header = _HEADER.pack(
        FMAP_MAGIC, FMAP_VERSION, fmap.channels, fmap.height, fmap.width
    )
    payload = fmap.data.astype("<f4", copy=False).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_feature_map(path) -> FeatureMap:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if blob[:4] != FMAP_MAGIC:
        raise BadMagic(f"{path}: expected {FMAP_MAGIC!r} header")
    if len(blob) < _HEADER.size:
        raise DimMismatch(f"{path}: truncated header ({len(blob)} bytes)")
    _, version, c, h, w = _HEADER.unpack_from(blob)
    if version != FMAP_VERSION:
        raise BadMagic(f"{path}: unsupported format version {version}")
    if min(c, h, w) < 1:
        raise DimMismatch(f"{path}: non-positive dims ({c}, {h}, {w})")
    expected = 4 * c * h * w
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise DimMismatch(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    if not np.isfinite(data).all():
        raise NonFiniteValue(f"{path}: payload contains NaN or Inf")
    return FeatureMap(data.copy())


def validate_mask(mask: np.ndarray) -> np.ndarray:
    """Check a {0,1} uint8 mask buffer; returns it unchanged."""
    if mask.ndim != 2 or min(mask.shape) < 1:
        raise DimMismatch(f"mask must be 2-D, got shape {mask.shape}")
    if mask.dtype != np.uint8:
        raise NonBinaryPixel(f"mask dtype must be uint8, got {mask.dtype}")
    bad = (mask > 1).sum()
    if bad:
        raise NonBinaryPixel(f"mask has {bad} pixels outside {{0, 1}}")
    return mask


def save_mask(mask: np.ndarray, path) -> None:
    validate_mask(mask)
    try:
        Image.fromarray(mask * np.uint8(255), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_mask(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    nonbinary = ~np.isin(arr, (0, 255))
    if nonbinary.any():
        value = int(arr[nonbinary][0])
        raise NonBinaryPixel(f"{path}: pixel value {value} is not in {{0, 255}}")
    return (arr == 255).astype(np.uint8)


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check an (h, w, 3) uint8 RGB buffer; returns it unchanged."""
    if img.ndim != 3 or img.shape[2] != 3 or min(img.shape[:2]) < 1:
        raise DimMismatch(f"image must be (h, w, 3), got shape {img.shape}")
    if img.dtype != np.uint8:
        raise DimMismatch(f"image dtype must be uint8, got {img.dtype}")
    return img


def save_image(img: np.ndarray, path) -> None:
    validate_image(img)
    try:
        Image.fromarray(img, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB")).copy()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
