"""Decoded raster container and image file I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


class EmptyImage(ValueError):
    """Raised when an image has zero pixels."""


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit RGBA pixels, row-major, shape ``(height, width, 4)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 4:
            raise ValueError(f"expected uint8 (H, W, 4) array, got {px.dtype} {px.shape}")

    @classmethod
    def from_array(cls, arr) -> ImageBuffer:
        """Wrap an ``(H, W, 3)`` or ``(H, W, 4)`` array; missing alpha becomes 255."""
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[2] not in (3, 4):
            raise ValueError(f"expected (H, W, 3|4) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        if arr.shape[2] == 3:
            alpha = np.full(arr.shape[:2] + (1,), 255, dtype=np.uint8)
            arr = np.concatenate([arr, alpha], axis=2)
        return cls(np.ascontiguousarray(arr))

    @classmethod
    def uniform(cls, pixel, width: int, height: int) -> ImageBuffer:
        px = tuple(pixel) + ((255,) if len(pixel) == 3 else ())
        return cls(np.tile(np.array(px, dtype=np.uint8), (height, width, 1)))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def size(self) -> int:
        return self.width * self.height

    def flat(self) -> np.ndarray:
        """Pixels as an ``(N, 4)`` array in row-major order."""
        return self.pixels.reshape(-1, 4)


def load_image(path) -> ImageBuffer:
    """Decode a JPEG/PNG file as plain sRGB; embedded ICC profiles are ignored."""
    with Image.open(path) as im:
        im.load()
        rgba = im.convert("RGBA")
    return ImageBuffer(np.asarray(rgba, dtype=np.uint8).copy())


def save_mask_png(bits: np.ndarray, path) -> None:
    """Write a boolean mask as a 1-bit PNG, white = True."""
    Image.fromarray(np.asarray(bits, dtype=bool)).convert("1").save(path, format="PNG")


def find_image(image_dir, image_id: str) -> Path | None:
    """Locate ``image_id`` under ``image_dir``, trying the usual suffixes."""
    root = Path(image_dir)
    direct = root / image_id
    if direct.suffix.lower() in IMAGE_SUFFIXES and direct.is_file():
        return direct
    for suffix in IMAGE_SUFFIXES + tuple(s.upper() for s in IMAGE_SUFFIXES):
        candidate = root / f"{image_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def list_images(paths) -> list[Path]:
    """Expand files and directories into a sorted list of image files."""
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(q for q in p.iterdir() if q.is_file() and q.suffix.lower() in IMAGE_SUFFIXES)
        else:
            out.append(p)
    return sorted(out)
