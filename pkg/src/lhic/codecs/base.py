"""Codec interfaces and the id registry persisted in bitstream headers."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

from ..errors import CodecError, RangeError


class LosslessCodec(ABC):
    name: str
    codec_id: int

    @abstractmethod
    def encode(self, img: np.ndarray) -> bytes: ...

    @abstractmethod
    def decode(self, data: bytes) -> np.ndarray: ...


class LossyCodec(ABC):
    name: str
    codec_id: int
    quality_range: tuple[int, int]
    default_qualities: tuple[int, ...]

    def check_quality(self, quality: int) -> int:
        lo, hi = self.quality_range
        if not isinstance(quality, (int, np.integer)) or not lo <= quality <= hi:
            raise RangeError(f"{self.name}: quality must be an integer in [{lo}, {hi}], got {quality!r}")
        return int(quality)

    @abstractmethod
    def encode(self, img: np.ndarray, quality: int) -> bytes: ...

    @abstractmethod
    def decode(self, data: bytes) -> np.ndarray: ...


class LosslessAsLossy(LossyCodec):
    """Lets a lossless codec fill the enhancement-layer slot; quality is ignored."""

    quality_range = (0, 0xFFFF)
    default_qualities = (0,)

    def __init__(self, inner: LosslessCodec):
        self.inner = inner
        self.name = inner.name
        self.codec_id = inner.codec_id

    def encode(self, img, quality=0):
        return self.inner.encode(img)

    def decode(self, data):
        return self.inner.decode(data)


# stable 1-byte ids; never renumber, the container stores them
BUILTIN_LOSSLESS_ID = 0x01
FLIF_ID = 0x02
BUILTIN_DCT_ID = 0x10
BPG_ID = 0x11

_FACTORIES: dict[int, tuple[str, bool, Callable[[], object]]] = {}


def register(codec_id: int, name: str, lossless: bool, factory: Callable[[], object]) -> None:
    if codec_id in _FACTORIES and _FACTORIES[codec_id][0] != name:
        raise ValueError(f"codec id {codec_id:#04x} already registered as {_FACTORIES[codec_id][0]}")
    _FACTORIES[codec_id] = (name, lossless, factory)


def codec_names() -> dict[str, int]:
    return {name: cid for cid, (name, _, _) in _FACTORIES.items()}


def _resolve(key) -> int:
    if isinstance(key, str):
        ids = codec_names()
        if key not in ids:
            raise CodecError(f"unknown codec {key!r}; known: {sorted(ids)}")
        return ids[key]
    if key not in _FACTORIES:
        raise CodecError(f"unknown codec id {key:#04x}")
    return key


def is_lossless(key) -> bool:
    return _FACTORIES[_resolve(key)][1]


def get_lossless(key) -> LosslessCodec:
    cid = _resolve(key)
    name, lossless, factory = _FACTORIES[cid]
    if not lossless:
        raise CodecError(f"codec {name} is lossy and cannot carry the base layer")
    return factory()


def get_lossy(key) -> LossyCodec:
    """Enhancement-layer codec; lossless codecs are wrapped so they can be used too."""
    cid = _resolve(key)
    _, lossless, factory = _FACTORIES[cid]
    codec = factory()
    return LosslessAsLossy(codec) if lossless else codec
