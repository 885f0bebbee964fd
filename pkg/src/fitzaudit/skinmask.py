"""Two-stage per-pixel YCbCr skin segmentation.

Stage one is a set of RGBA inequalities, stage two bounds the chroma plane
(Cb, Cr) by five half-planes. Both stages are evaluated in exact integer
arithmetic: chroma is carried as ``1e6 * value`` and each threshold line is
scaled to integer coefficients, so there is no rounding at the boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .colorspace import ycbcr_scaled_array
from .image import EmptyImage, ImageBuffer

_S = 1_000_000  # chroma scale used by ycbcr_scaled_array


@dataclass(frozen=True)
class SkinMask:
    bits: np.ndarray  # (height, width) bool, True = retained as skin

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def coverage(self) -> float:
        return mask_coverage(self)


def rgba_rule(rgba: np.ndarray) -> np.ndarray:
    """RGBA inequalities: R>95, R>G, R>B, G>40, B>20, |R-G|>15, A>15."""
    c = np.asarray(rgba).astype(np.int16)
    r, g, b, a = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    return (
        (r > 95) & (r > g) & (r > b) & (g > 40) & (b > 20)
        & (np.abs(r - g) > 15) & (a > 15)
    )


def chroma_rule(rgba: np.ndarray) -> np.ndarray:
    """Chroma-plane inequalities on (Cb, Cr), evaluated exactly."""
    _, cb, cr = ycbcr_scaled_array(rgba)
    return (
        (cr > 135 * _S)
        # Cr >= 0.3448 Cb + 76.2069
        & (10_000 * cr >= 3_448 * cb + 762_069 * _S)
        # Cr >= -4.5652 Cb + 234.5652
        & (10_000 * cr >= -45_652 * cb + 2_345_652 * _S)
        # Cr <= -1.15 Cb + 301.75
        & (100 * cr <= -115 * cb + 30_175 * _S)
        # Cr <= -2.2857 Cb + 432.85
        & (10_000 * cr <= -22_857 * cb + 4_328_500 * _S)
    )


def skin_rule(rgba: np.ndarray) -> np.ndarray:
    """Vectorised skin test over ``(..., 4)`` RGBA values."""
    rgba = np.asarray(rgba)
    return rgba_rule(rgba) & chroma_rule(rgba)


def pixel_is_skin(p: Sequence[int]) -> bool:
    if len(p) == 3:
        p = (*p, 255)
    return bool(skin_rule(np.array(p, dtype=np.int64)))


def skin_mask(img: ImageBuffer) -> SkinMask:
    if img.size == 0:
        raise EmptyImage("cannot mask an image with zero pixels")
    return SkinMask(skin_rule(img.pixels))


def mask_coverage(m: SkinMask) -> float:
    total = m.bits.size
    if total == 0:
        return 0.0
    return float(np.count_nonzero(m.bits)) / total
