"""Individual typology angle (ITA) estimation and Fitzpatrick mapping.

ITA is ``arctan((L* - 50) / b*) * 180 / pi`` where L* and b* are trimmed
means over the selected pixels: values further than one (population)
standard deviation from the untrimmed mean are discarded before averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .colorspace import rgb_to_lab_array
from .image import EmptyImage, ImageBuffer
from .skinmask import skin_rule

UNKNOWN = -1
FITZPATRICK_TYPES = (1, 2, 3, 4, 5, 6)

Mode = Literal["full", "masked"]
Scheme = Literal["kinyanjui", "empirical"]
Trim = Literal["independent", "joint"]

MODES = ("full", "masked")
SCHEMES = ("kinyanjui", "empirical")

# Upper bounds (inclusive) separating type k from type k+1. A value above the
# first bound is type 1; a value at or below the last bound is type 6.
ITA_THRESHOLDS: dict[str, tuple[float, ...]] = {
    "kinyanjui": (55.0, 41.0, 28.0, 19.0, 10.0),
    "empirical": (40.0, 23.0, 12.0, 0.0, -25.0),
}


class EmptySequence(ValueError):
    pass


@dataclass(frozen=True)
class ItaResult:
    ita_degrees: float
    mode: str
    pixels_considered: int
    pixels_retained: int
    l_mean: float
    b_mean: float
    singular: bool = False
    fallback: bool = False

    @property
    def negative_b(self) -> bool:
        """b* mean below zero: single-argument arctan folds the angle."""
        return self.b_mean < 0

    def fitzpatrick(self, scheme: Scheme) -> int:
        return ita_to_fitzpatrick(self.ita_degrees, scheme)


def _sum(values: np.ndarray, sort: bool) -> float:
    if sort:
        values = np.sort(values, kind="stable")
    return float(np.sum(values))


def _trim_mask(values: np.ndarray, sort: bool) -> np.ndarray:
    n = values.size
    mu = _sum(values, sort) / n
    dev = np.abs(values - mu)
    sigma = math.sqrt(_sum(dev * dev, sort) / n)
    keep = dev <= sigma
    if not keep.any():
        # rounding can push every |v - mu| just past sigma (e.g. two values)
        keep = dev == dev.min()
    return keep


def trimmed_stats(values, sort: bool = False) -> tuple[float, int]:
    """Mean over values within one population std of the mean.

    Returns ``(trimmed_mean, retained_count)``. With ``sort=True`` sums are
    taken over sorted values, which makes the result independent of input
    order to the last bit.

    >>> trimmed_stats([0, 0, 0, 0, 100])
    (0.0, 4)
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptySequence("trimmed_stats needs at least one value")
    kept = v[_trim_mask(v, sort)]
    return _sum(kept, sort) / kept.size, int(kept.size)


def ita_from_means(l_mean: float, b_mean: float) -> tuple[float, bool]:
    """Angle in degrees plus a flag for the b* == 0 singularity."""
    if b_mean == 0:
        if l_mean > 50:
            return 90.0, True
        if l_mean < 50:
            return -90.0, True
        return 0.0, True
    return math.atan((l_mean - 50.0) / b_mean) * 180.0 / math.pi, False


def select_pixels(img: ImageBuffer, mode: Mode) -> tuple[np.ndarray, bool]:
    """Pixels feeding the estimate, and whether the empty-mask fallback fired."""
    flat = img.flat()
    if mode == "full":
        return flat, False
    if mode != "masked":
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    keep = skin_rule(flat)
    if not keep.any():
        return flat, True
    return flat[keep], False


def compute_ita(
    img: ImageBuffer,
    mode: Mode = "full",
    trim: Trim = "independent",
    sort: bool = False,
) -> ItaResult:
    """Trimmed-mean ITA of an image.

    ``mode="masked"`` restricts to YCbCr skin pixels and falls back to the
    whole image when none qualify. ``trim="independent"`` trims L* and b*
    against their own statistics; ``"joint"`` keeps only pixels that survive
    both trims and averages both channels over that common set.
    """
    if img.size == 0:
        raise EmptyImage("cannot compute ITA of an empty image")
    pixels, fallback = select_pixels(img, mode)
    lab = rgb_to_lab_array(pixels)
    l_vals = np.ascontiguousarray(lab[:, 0])
    b_vals = np.ascontiguousarray(lab[:, 2])
    if trim == "independent":
        l_mean, l_kept = trimmed_stats(l_vals, sort)
        b_mean, b_kept = trimmed_stats(b_vals, sort)
        retained = min(l_kept, b_kept)
    elif trim == "joint":
        keep = _trim_mask(l_vals, sort) & _trim_mask(b_vals, sort)
        if not keep.any():
            keep = np.ones_like(keep)
        retained = int(keep.sum())
        l_mean = _sum(l_vals[keep], sort) / retained
        b_mean = _sum(b_vals[keep], sort) / retained
    else:
        raise ValueError(f"unknown trim {trim!r}")
    ita, singular = ita_from_means(l_mean, b_mean)
    return ItaResult(
        ita_degrees=ita,
        mode=mode,
        pixels_considered=int(pixels.shape[0]),
        pixels_retained=retained,
        l_mean=l_mean,
        b_mean=b_mean,
        singular=singular,
        fallback=fallback,
    )


def ita_to_fitzpatrick(ita: float, scheme: Scheme = "empirical") -> int:
    """Map an ITA angle to Fitzpatrick type 1-6.

    Each band is upper-inclusive, lower-exclusive, so a value sitting on a
    threshold goes to the darker type.
    """
    if not math.isfinite(ita):
        raise ValueError(f"ITA must be finite, got {ita}")
    try:
        bounds = ITA_THRESHOLDS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}") from None
    return 1 + sum(1 for t in bounds if ita <= t)
