"""Color-space primitives: piecewise sRGB transfer and albedo calibration."""

from __future__ import annotations

import numpy as np

from .types import ALBEDO_MAX, ALBEDO_MIN, Image

_SRGB_CUT = 0.0031308
_SRGB_CUT_INV = 0.04045


def linear_to_srgb(img):
    """Apply the piecewise sRGB transfer per channel, then clip to [0, 1].

    Accepts an Image or a bare array; returns the same kind. Raises on
    non-finite input, identifying the offending pixel.
    """
    arr, was_image = _unwrap(img)
    if not np.all(np.isfinite(arr)):
        flat = np.flatnonzero(~np.isfinite(arr))
        ch = arr.shape[-1] if arr.ndim >= 1 else 1
        raise ValueError(f"non-finite value at pixel index {int(flat[0] // max(ch, 1))}")
    x = arr.astype(np.float64)
    out = np.where(x <= _SRGB_CUT, 12.92 * x, 1.055 * np.power(np.maximum(x, 0.0), 1 / 2.4) - 0.055)
    out = np.clip(out, 0.0, 1.0)
    return _rewrap(out, img, was_image)


def srgb_to_linear(img):
    """Numerical inverse of linear_to_srgb on [0, 1]."""
    arr, was_image = _unwrap(img)
    x = np.clip(arr.astype(np.float64), 0.0, 1.0)
    out = np.where(x <= _SRGB_CUT_INV, x / 12.92, np.power((x + 0.055) / 1.055, 2.4))
    return _rewrap(out, img, was_image)


def calibrate_albedo(a):
    """Affinely map raw albedo from [0, 1] into [0.03, 0.8], then clamp.

    Prevents zero albedo for near-black materials; total on finite input.
    """
    a = np.asarray(a, dtype=np.float64)
    out = ALBEDO_MIN + a * (ALBEDO_MAX - ALBEDO_MIN)
    return np.clip(out, ALBEDO_MIN, ALBEDO_MAX)


def _unwrap(img):
    if isinstance(img, Image):
        return img.to_array(), True
    return np.asarray(img), False


def _rewrap(arr, original, was_image):
    if was_image:
        return Image(original.width, original.height, original.channels, arr.astype(np.float32).ravel())
    return arr
