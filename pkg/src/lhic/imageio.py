"""PNG / PPM reading and writing for 8-bit RGB images (H x W x 3 uint8)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeError


def as_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ShapeError(f"images must be uint8, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"images must be H x W x 3, got shape {img.shape}")
    return img


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode.startswith(("I", "F")):
            # 16-bit and float modes would be silently truncated by convert("RGB")
            raise ShapeError(f"{path}: unsupported image mode {im.mode}; expected 8-bit RGB")
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img) -> None:
    path = Path(path)
    img = as_image(img)
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm") else "PNG"
    Image.fromarray(img, "RGB").save(path, format=fmt)


IMAGE_SUFFIXES = (".png", ".ppm", ".pnm", ".bmp", ".tif", ".tiff")
LOSSY_SUFFIXES = (".jpg", ".jpeg", ".webp")


def list_images(directory, include_lossy: bool = False) -> list[Path]:
    """Image files in ``directory`` in sorted (deterministic) order.

    Lossy formats are left out unless ``include_lossy`` is set, so callers
    that want to report them can see them.
    """
    suffixes = IMAGE_SUFFIXES + (LOSSY_SUFFIXES if include_lossy else ())
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in suffixes and p.is_file())
