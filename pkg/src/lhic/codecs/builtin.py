"""Hermetic codecs so the whole pipeline runs without external binaries.

``PredictiveLossless``: reversible colour transform (G, R-G, B-G mod 256),
then the best of four spatial predictors, residuals mod 256, deflate.

``BlockDCTCodec``: per-channel 8x8 orthonormal DCT, uniform quantizer whose
step is the quality setting (DC step capped at 8 so the block mean survives
any step), coefficient-major ordering, deflate.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from scipy.fft import dctn, idctn

from ..errors import CodecError
from ..imageio import as_image
from ..ranges import round_half_away
from .base import BUILTIN_DCT_ID, BUILTIN_LOSSLESS_ID, LosslessCodec, LossyCodec

_ZLEVEL = 9


def _inflate(payload: bytes, expected: int, what: str) -> bytes:
    try:
        raw = zlib.decompress(payload)
    except zlib.error as exc:
        raise CodecError(f"corrupt {what} payload: {exc}") from None
    if len(raw) != expected:
        raise CodecError(f"{what} payload holds {len(raw)} bytes, expected {expected}")
    return raw


# lossless -------------------------------------------------------------------

# predictor ids: 0 none, 1 left, 2 up, 3 gradient (left + up - upleft)
_PREDICTORS = (0, 1, 2, 3)


def _diff(planes: np.ndarray, predictor: int) -> np.ndarray:
    # planes: C x H x W uint8; arithmetic wraps mod 256
    d = planes
    if predictor in (1, 3):
        d = np.diff(d, axis=2, prepend=np.uint8(0))
    if predictor in (2, 3):
        d = np.diff(d, axis=1, prepend=np.uint8(0))
    return d


def _undiff(d: np.ndarray, predictor: int) -> np.ndarray:
    x = d
    if predictor in (2, 3):
        x = np.cumsum(x, axis=1, dtype=np.uint8)
    if predictor in (1, 3):
        x = np.cumsum(x, axis=2, dtype=np.uint8)
    return x


class PredictiveLossless(LosslessCodec):
    name = "builtin-lossless"
    codec_id = BUILTIN_LOSSLESS_ID
    _HEADER = struct.Struct("<IIB")

    def encode(self, img: np.ndarray) -> bytes:
        img = as_image(img)
        h, w, _ = img.shape
        r, g, b = (img[..., i] for i in range(3))
        planes = np.stack([g, r - g, b - g])
        best = None
        for pred in _PREDICTORS:
            payload = zlib.compress(_diff(planes, pred).tobytes(), _ZLEVEL)
            if best is None or len(payload) < len(best[1]):
                best = (pred, payload)
        pred, payload = best
        return self._HEADER.pack(w, h, pred) + payload

    def decode(self, data: bytes) -> np.ndarray:
        if len(data) < self._HEADER.size:
            raise CodecError("lossless stream shorter than its header")
        w, h, pred = self._HEADER.unpack_from(data)
        if pred not in _PREDICTORS or w == 0 or h == 0:
            raise CodecError(f"bad lossless header (w={w}, h={h}, predictor={pred})")
        raw = _inflate(data[self._HEADER.size :], 3 * w * h, "lossless")
        planes = _undiff(np.frombuffer(raw, dtype=np.uint8).reshape(3, h, w), pred)
        g, rg, bg = planes
        return np.stack([rg + g, g, bg + g], axis=-1)


# lossy ----------------------------------------------------------------------

BLOCK = 8
DC_STEP_CAP = 8


def _pad_to_block(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return np.pad(plane, ((0, -h % BLOCK), (0, -w % BLOCK)), mode="edge")


def _blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _unblocks(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * BLOCK, bw * BLOCK)


def _step_matrix(step: int) -> np.ndarray:
    q = np.full((BLOCK, BLOCK), float(step))
    q[0, 0] = min(step, DC_STEP_CAP)
    return q


class BlockDCTCodec(LossyCodec):
    name = "builtin-dct"
    codec_id = BUILTIN_DCT_ID
    quality_range = (1, 0xFFFF)
    default_qualities = (2, 4, 8, 16, 32)
    _HEADER = struct.Struct("<IIH")

    def encode(self, img: np.ndarray, quality: int) -> bytes:
        img = as_image(img)
        step = self.check_quality(quality)
        h, w, _ = img.shape
        qmat = _step_matrix(step)
        streams = []
        for c in range(3):
            blocks = _blocks(_pad_to_block(img[..., c]).astype(np.float64) - 128.0)
            coef = dctn(blocks, axes=(-2, -1), norm="ortho")
            q = round_half_away(coef / qmat).astype(np.int32)
            # coefficient-major: all DCs, then all (0,1) terms, ...; DCs delta-coded
            q = q.reshape(-1, BLOCK * BLOCK).T.copy()
            q[0, 1:] -= q[0, :-1].copy()
            streams.append(q)
        coeffs = np.concatenate([s.ravel() for s in streams])
        if np.abs(coeffs).max(initial=0) > 32767:
            raise CodecError("DCT coefficient overflow")
        return self._HEADER.pack(w, h, step) + zlib.compress(coeffs.astype("<i2").tobytes(), _ZLEVEL)

    def decode(self, data: bytes) -> np.ndarray:
        if len(data) < self._HEADER.size:
            raise CodecError("DCT stream shorter than its header")
        w, h, step = self._HEADER.unpack_from(data)
        if w == 0 or h == 0 or step == 0:
            raise CodecError(f"bad DCT header (w={w}, h={h}, step={step})")
        bh, bw = -(-h // BLOCK), -(-w // BLOCK)
        n = bh * bw * BLOCK * BLOCK
        raw = _inflate(data[self._HEADER.size :], 2 * 3 * n, "DCT")
        coeffs = np.frombuffer(raw, dtype="<i2").astype(np.int64).reshape(3, BLOCK * BLOCK, bh * bw)
        qmat = _step_matrix(step)
        out = np.empty((h, w, 3), dtype=np.uint8)
        for c in range(3):
            q = coeffs[c].copy()
            q[0] = np.cumsum(q[0])
            blocks = q.T.reshape(bh, bw, BLOCK, BLOCK) * qmat
            pix = idctn(blocks, axes=(-2, -1), norm="ortho") + 128.0
            plane = _unblocks(np.clip(round_half_away(pix), 0, 255))
            out[..., c] = plane[:h, :w]
        return out

