"""Pixel-level operations on uint8 RGB images and {0,1} masks.

Geometric operations come in image/mask pairs that apply the same spatial
map to both, with bilinear interpolation for images and nearest for masks
(so masks stay binary). Photometric operations touch images only.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

_LUMA = np.array([0.299, 0.587, 0.114])


def resize_image(img: np.ndarray, height: int, width: int) -> np.ndarray:
    if img.shape[:2] == (height, width):
        return img.copy()
    pil = Image.fromarray(img, mode="RGB")
    return np.asarray(pil.resize((width, height), Image.Resampling.BILINEAR)).copy()


def resize_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    if mask.shape == (height, width):
        return mask.copy()
    pil = Image.fromarray(mask, mode="L")
    return np.asarray(pil.resize((width, height), Image.Resampling.NEAREST)).copy()


def crop_resize_pair(
    img: np.ndarray,
    mask: np.ndarray,
    top: int,
    left: int,
    crop_h: int,
    crop_w: int,
    out_size: int,
) -> tuple[np.ndarray, np.ndarray]:
    img_c = img[top : top + crop_h, left : left + crop_w]
    mask_c = mask[top : top + crop_h, left : left + crop_w]
    return (
        resize_image(img_c, out_size, out_size),
        resize_mask(mask_c, out_size, out_size),
    )


def rotate_pair(
    img: np.ndarray, mask: np.ndarray, degrees: float
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate both buffers about the image center, filling exposed corners
    with black / background."""
    img_r = Image.fromarray(img, mode="RGB").rotate(
        degrees, resample=Image.Resampling.BILINEAR, fillcolor=(0, 0, 0)
    )
    mask_r = Image.fromarray(mask, mode="L").rotate(
        degrees, resample=Image.Resampling.NEAREST, fillcolor=0
    )
    return np.asarray(img_r).copy(), np.asarray(mask_r).copy()


def hflip_pair(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(img[:, ::-1]), np.ascontiguousarray(mask[:, ::-1])


def luma(img: np.ndarray) -> np.ndarray:
    """Weighted grayscale plane as float64."""
    return img.astype(np.float64) @ _LUMA


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(x, 0.0, 255.0)).astype(np.uint8)


def _blend(a: np.ndarray, b: np.ndarray, ratio: float) -> np.ndarray:
    return _to_uint8(ratio * a.astype(np.float64) + (1.0 - ratio) * b)


def adjust_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    return _blend(img, np.zeros_like(img, dtype=np.float64), factor)


def adjust_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    mean = luma(img).mean()
    return _blend(img, np.full_like(img, mean, dtype=np.float64), factor)


def adjust_saturation(img: np.ndarray, factor: float) -> np.ndarray:
    return _blend(img, luma(img)[..., None], factor)


def adjust_hue(img: np.ndarray, shift: float) -> np.ndarray:
    """Shift hue by ``shift`` (fraction of a full turn, wrapping)."""
    if shift == 0.0:
        return img.copy()
    hsv = rgb_to_hsv(img.astype(np.float64) / 255.0)
    hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
    return _to_uint8(hsv_to_rgb(hsv) * 255.0)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    gray = _to_uint8(luma(img))
    return np.repeat(gray[..., None], 3, axis=2)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    blurred = gaussian_filter(
        img.astype(np.float64), sigma=(sigma, sigma, 0.0), mode="nearest"
    )
    return _to_uint8(blurred)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV, all components in [0, 1]."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    value = maxc
    delta = maxc - minc
    sat = np.where(maxc > 0.0, delta / np.where(maxc == 0.0, 1.0, maxc), 0.0)
    safe = np.where(delta == 0.0, 1.0, delta)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    hue = np.where(
        r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc)
    )
    hue = np.where(delta == 0.0, 0.0, (hue / 6.0) % 1.0)
    return np.stack([hue, sat, value], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all components in [0, 1]."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)
