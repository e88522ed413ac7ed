"""Value-domain conversions between 8-bit images, [-1, 1] tensors and residuals.

Residual scalings map signed residuals into [0, 255] so that an ordinary
8-bit image codec can carry them:

* ``shift``  - ``u = round((r + 255) / 2)``; inverse ``2u - 255``.
* ``minmax`` - ``u = round((r - r_min) / (r_max - r_min) * 255)`` with the
  observed per-image extrema stored as side information.
* ``clip``   - clamp to ``[-bound, bound]`` (default 120) and apply
  ``minmax`` with those fixed bounds.

Every ``round`` here is half-away-from-zero. The residual maps are evaluated
in exact integer arithmetic, so results never depend on float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import RangeError

CLIP_BOUND = 120
SHIFT_BOUND = 255


class ScalingMethod(IntEnum):
    SHIFT = 0
    MINMAX = 1
    CLIP = 2

    @classmethod
    def parse(cls, value) -> "ScalingMethod":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise RangeError(f"unknown scaling method {value!r}; expected shift, minmax or clip") from None
        return cls(value)


@dataclass(frozen=True)
class ScalingParams:
    """Everything the decoder needs to invert a residual scaling."""

    method: ScalingMethod
    r_min: int
    r_max: int

    def __post_init__(self):
        object.__setattr__(self, "method", ScalingMethod.parse(self.method))
        if self.r_min > self.r_max:
            raise RangeError(f"r_min {self.r_min} > r_max {self.r_max}")
        if self.method is not ScalingMethod.MINMAX and self.r_min == self.r_max:
            raise RangeError(f"{self.method.name.lower()} scaling needs r_min < r_max")

    @property
    def degenerate(self) -> bool:
        """Flat residual (min == max): encoded as all-zero, decoded as the constant."""
        return self.r_min == self.r_max


class ClampCounter:
    """Counts values that had to be clamped into [-1, 1] before quantization."""

    def __init__(self):
        self.count = 0

    def __call__(self, n: int) -> None:
        self.count += int(n)


clamp_events = ClampCounter()


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def normalize_u8(x) -> np.ndarray:
    """8-bit values to [-1, 1]: ``x / 255 * 2 - 1`` (float32)."""
    x = np.asarray(x)
    return (x.astype(np.float32) / np.float32(255) * np.float32(2) - np.float32(1)).astype(np.float32)


def quantize_unit(x_f) -> np.ndarray:
    """[-1, 1] values to 8-bit codes: ``round((x_f + 1) / 2 * 255)``.

    Out-of-range input is clamped and tallied in :data:`clamp_events`.
    """
    x_f = np.asarray(x_f, dtype=np.float64)
    outside = np.count_nonzero((x_f < -1) | (x_f > 1) | np.isnan(x_f))
    if outside:
        clamp_events(outside)
        x_f = np.clip(np.nan_to_num(x_f, nan=0.0), -1.0, 1.0)
    return round_half_away((x_f + 1.0) / 2.0 * 255.0).astype(np.uint8)


def _as_residual(r) -> np.ndarray:
    r = np.asarray(r)
    if not np.issubdtype(r.dtype, np.integer):
        raise RangeError(f"residuals must be integers, got dtype {r.dtype}")
    return r.astype(np.int64)


def _forward_affine(r: np.ndarray, r_min: int, r_max: int) -> np.ndarray:
    # round((r - r_min) * 255 / span) for non-negative numerators, in integers
    span = r_max - r_min
    num = (r - r_min) * 255
    return ((2 * num + span) // (2 * span)).astype(np.uint8)


def _inverse_affine(u: np.ndarray, r_min: int, r_max: int) -> np.ndarray:
    span = r_max - r_min
    return r_min + (2 * u.astype(np.int64) * span + 255) // 510


def scale_shift(r) -> np.ndarray:
    r = _as_residual(r)
    if r.size and (r.min() < -SHIFT_BOUND or r.max() > SHIFT_BOUND):
        raise RangeError(f"shift scaling needs residuals in [-255, 255], got [{r.min()}, {r.max()}]")
    return ((r + SHIFT_BOUND + 1) // 2).astype(np.uint8)


def unscale_shift(u) -> np.ndarray:
    return 2 * np.asarray(u).astype(np.int16) - SHIFT_BOUND


def minmax_params(r) -> ScalingParams:
    r = _as_residual(r)
    return ScalingParams(ScalingMethod.MINMAX, int(r.min()), int(r.max()))


def scale_minmax(r, params: ScalingParams | None = None) -> np.ndarray:
    r = _as_residual(r)
    if params is None:
        params = minmax_params(r)
    lo, hi = params.r_min, params.r_max
    if r.size and (r.min() < lo or r.max() > hi):
        raise RangeError(f"residual range [{r.min()}, {r.max()}] exceeds declared bounds [{lo}, {hi}]")
    if params.degenerate:
        return np.zeros(r.shape, dtype=np.uint8)
    return _forward_affine(r, lo, hi)


def unscale_minmax(u, params: ScalingParams) -> np.ndarray:
    u = np.asarray(u)
    if params.degenerate:
        return np.full(u.shape, params.r_min, dtype=np.int16)
    return _inverse_affine(u, params.r_min, params.r_max).astype(np.int16)


def clip_params(bound: int = CLIP_BOUND) -> ScalingParams:
    if not 0 < bound <= SHIFT_BOUND:
        raise RangeError(f"clip bound must be in (0, 255], got {bound}")
    return ScalingParams(ScalingMethod.CLIP, -bound, bound)


def scale_clip(r, bound: int = CLIP_BOUND) -> tuple[np.ndarray, ScalingParams]:
    params = clip_params(bound)
    r = np.clip(_as_residual(r), -bound, bound)
    return _forward_affine(r, -bound, bound), params


def unscale_clip(u, bound: int = CLIP_BOUND) -> np.ndarray:
    return _inverse_affine(np.asarray(u), -bound, bound).astype(np.int16)


def scale_residual(r, method, clip_bound: int = CLIP_BOUND) -> tuple[np.ndarray, ScalingParams]:
    """Dispatch on ``method``; returns the 8-bit image and the parameters to store."""
    method = ScalingMethod.parse(method)
    if method is ScalingMethod.SHIFT:
        return scale_shift(r), ScalingParams(method, -SHIFT_BOUND, SHIFT_BOUND)
    if method is ScalingMethod.MINMAX:
        params = minmax_params(r)
        return scale_minmax(r, params), params
    return scale_clip(r, clip_bound)


def unscale_residual(u, params: ScalingParams) -> np.ndarray:
    if params.method is ScalingMethod.SHIFT:
        return unscale_shift(u)
    if params.method is ScalingMethod.MINMAX:
        return unscale_minmax(u, params)
    return unscale_clip(u, params.r_max)
