"""Per-pixel conversions from 8-bit sRGB(A) to YCbCr and CIE-LAB.

YCbCr is full-range BT.601 (JFIF), chroma centred on 128, in 0-255 units.
CIE-LAB uses IEC 61966-2-1 sRGB linearisation, the sRGB->XYZ matrix and the
D65 2-degree white point.

Scalar functions take a ``Pixel`` (or any 3/4-tuple); the ``*_array``
variants take ``uint8`` arrays shaped ``(..., 3)`` or ``(..., 4)``.
Alpha never affects the result.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np


class Pixel(NamedTuple):
    r: int
    g: int
    b: int
    a: int = 255


class YCbCr(NamedTuple):
    y: float
    cb: float
    cr: float


class Lab(NamedTuple):
    l: float  # noqa: E741
    a_star: float
    b_star: float


# BT.601 full-range coefficients scaled by 1e6 so the linear forms are exact
# integers; gray inputs then give cb == cr == 128 with no rounding residue.
YCBCR_SCALE = 1_000_000
_Y_COEF = np.array([299_000, 587_000, 114_000], dtype=np.int64)
_CB_COEF = np.array([-168_736, -331_264, 500_000], dtype=np.int64)
_CR_COEF = np.array([500_000, -418_688, -81_312], dtype=np.int64)
CHROMA_OFFSET = 128

# sRGB (D65) -> XYZ. The Y row sums to exactly 1.0 in double precision.
SRGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
D65_WHITE = (0.95047, 1.0, 1.08883)

_LAB_DELTA = 6.0 / 29.0
_LAB_EPS = _LAB_DELTA**3


def _check_pixel(p: Sequence[int]) -> tuple[int, int, int]:
    if len(p) not in (3, 4):
        raise ValueError(f"pixel must have 3 or 4 channels, got {len(p)}")
    for v in p:
        if not 0 <= int(v) <= 255:
            raise ValueError(f"channel value out of range [0, 255]: {v}")
    return int(p[0]), int(p[1]), int(p[2])


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    """Undo the sRGB transfer curve; ``c`` is normalised to [0, 1]."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


# One entry per 8-bit code value; avoids a pow() per pixel channel.
_LINEAR_LUT = srgb_to_linear(np.arange(256) / 255.0)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _LAB_EPS, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def ycbcr_scaled_array(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Y, Cb, Cr) * 1e6`` as exact int64 arrays."""
    rgb = np.asarray(rgb)
    r = rgb[..., 0].astype(np.int64)
    g = rgb[..., 1].astype(np.int64)
    b = rgb[..., 2].astype(np.int64)
    offset = CHROMA_OFFSET * YCBCR_SCALE
    y = _Y_COEF[0] * r + _Y_COEF[1] * g + _Y_COEF[2] * b
    cb = _CB_COEF[0] * r + _CB_COEF[1] * g + _CB_COEF[2] * b + offset
    cr = _CR_COEF[0] * r + _CR_COEF[1] * g + _CR_COEF[2] * b + offset
    return y, cb, cr


def rgb_to_ycbcr_array(rgb: np.ndarray) -> np.ndarray:
    y, cb, cr = ycbcr_scaled_array(rgb)
    return np.stack([y, cb, cr], axis=-1) / YCBCR_SCALE


def rgb_to_ycbcr(p: Sequence[int]) -> YCbCr:
    """Full-range BT.601 conversion of one pixel.

    >>> rgb_to_ycbcr(Pixel(128, 128, 128))
    YCbCr(y=128.0, cb=128.0, cr=128.0)
    """
    r, g, b = _check_pixel(p)
    y, cb, cr = rgb_to_ycbcr_array(np.array([r, g, b], dtype=np.uint8))
    return YCbCr(float(y), float(cb), float(cr))


def rgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """Convert ``uint8`` sRGB(A) values to LAB, shape ``(..., 3)``."""
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8:
        if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
            raise ValueError("channel values must lie in [0, 255]")
        rgb = rgb.astype(np.uint8)
    lin_r = _LINEAR_LUT[rgb[..., 0]]
    lin_g = _LINEAR_LUT[rgb[..., 1]]
    lin_b = _LINEAR_LUT[rgb[..., 2]]
    # explicit per-element sums: BLAS matmul may vary bits with array layout
    m = SRGB_TO_XYZ
    x = m[0, 0] * lin_r + m[0, 1] * lin_g + m[0, 2] * lin_b
    y = m[1, 0] * lin_r + m[1, 1] * lin_g + m[1, 2] * lin_b
    z = m[2, 0] * lin_r + m[2, 1] * lin_g + m[2, 2] * lin_b
    fx = _lab_f(x / D65_WHITE[0])
    fy = _lab_f(y / D65_WHITE[1])
    fz = _lab_f(z / D65_WHITE[2])
    lab = np.empty(lin_r.shape + (3,), dtype=np.float64)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab


def rgb_to_lab(p: Sequence[int]) -> Lab:
    r, g, b = _check_pixel(p)
    l, a, bs = rgb_to_lab_array(np.array([r, g, b], dtype=np.uint8))
    return Lab(float(l), float(a), float(bs))
