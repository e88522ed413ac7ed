"""PSNR and multi-scale SSIM on 8-bit RGB images."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeError
from .imageio import as_image

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03
DATA_RANGE = 255.0


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"image dims differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """``10 log10(255^2 / MSE)`` over all pixels and channels; ``inf`` for identical images."""
    a, b = _check_pair(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(DATA_RANGE**2 / mse))


def _gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    # separable Gaussian over H and W of an H x W x C array, keeping only fully covered pixels
    out = correlate1d(img, win, axis=0, mode="constant")
    out = correlate1d(out, win, axis=1, mode="constant")
    r = len(win) // 2
    return out[r : img.shape[0] - r, r : img.shape[1] - r]


def _ssim_components(x: np.ndarray, y: np.ndarray, win: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean SSIM and mean contrast-structure term."""
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2
    mu_x, mu_y = _filter_valid(x, win), _filter_valid(y, win)
    xx, yy, xy = _filter_valid(x * x, win), _filter_valid(y * y, win), _filter_valid(x * y, win)
    var_x, var_y, cov = xx - mu_x**2, yy - mu_y**2, xy - mu_x * mu_y
    lum = (2 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
    cs = (2 * cov + c2) / (var_x + var_y + c2)
    return (lum * cs).mean(axis=(0, 1)), cs.mean(axis=(0, 1))


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    # odd sides are extended by mirroring the last row/column before 2x2 averaging
    img = np.pad(img, ((0, h % 2), (0, w % 2), (0, 0)), mode="symmetric")
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def available_scales(height: int, width: int, max_scales: int = len(MS_SSIM_WEIGHTS)) -> int:
    n, side = 0, min(height, width)
    while n < max_scales and side >= WINDOW:
        n += 1
        side = (side + 1) // 2
    return n


def ms_ssim(a, b, weights=MS_SSIM_WEIGHTS) -> float:
    """5-scale MS-SSIM (11x11 Gaussian, sigma 1.5), computed per channel then averaged.

    Images smaller than 176 px on a side get fewer scales, with the leading
    weights renormalized to sum to one, and a warning.
    """
    a, b = _check_pair(a, b)
    n = available_scales(*a.shape[:2], len(weights))
    if n == 0:
        raise ShapeError(f"image {a.shape[1]}x{a.shape[0]} is smaller than the {WINDOW}x{WINDOW} SSIM window")
    w = np.asarray(weights[:n], dtype=np.float64)
    if n < len(weights):
        warnings.warn(f"MS-SSIM on {a.shape[1]}x{a.shape[0]} image uses {n} of {len(weights)} scales", stacklevel=2)
        w = w / w.sum()
    win = _gaussian_window()
    x, y = a.astype(np.float64), b.astype(np.float64)
    terms = []
    for i in range(n):
        ssim, cs = _ssim_components(x, y, win)
        terms.append(ssim if i == n - 1 else cs)
        if i < n - 1:
            x, y = _downsample(x), _downsample(y)
    per_channel = np.prod(np.maximum(np.stack(terms), 0.0) ** w[:, None], axis=0)
    return float(per_channel.mean())


@dataclass
class QualityReport:
    psnr_db: float
    ms_ssim: float
    bpp: float

    def to_dict(self) -> dict:
        return {k: format_metric(v) if isinstance(v, float) and math.isinf(v) else v for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def format_metric(v: float) -> str | float:
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def quality_report(original, decoded, bpp_value: float) -> QualityReport:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ssim = ms_ssim(original, decoded)
    except ShapeError:
        ssim = math.nan
    return QualityReport(psnr(original, decoded), ssim, bpp_value)
