"""The ``.lhic`` layered bitstream.

All integers little-endian. Version 1 layout:

    offset  size  field
         0     4  magic "LHIC"
         4     1  version (1)
         5     4  width  u32   original image width
         9     4  height u32   original image height
        13     1  compact_scale u8
        14     1  scaling method u8 (0 shift, 1 minmax, 2 clip)
        15     2  r_min i16
        17     2  r_max i16
        19     1  lossless (base layer) codec id
        20     1  lossy (enhancement layer) codec id
        21     8  model hash
        29     4  base_len u32
        33     B  base layer bytes
      33+B     4  enh_len u32
      37+B     E  enhancement layer bytes

A zero-length enhancement layer means the decoder outputs the coarse
reconstruction alone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from . import codecs
from .errors import (
    BadMagicError,
    HeaderFieldError,
    LengthError,
    RangeError,
    TruncatedStreamError,
    UnsupportedVersionError,
)
from .ranges import ScalingMethod, ScalingParams

MAGIC = b"LHIC"
VERSION = 1
_HEADER = struct.Struct("<4sBIIBBhhBB8sI")
HEADER_SIZE = _HEADER.size  # 33, up to and including base_len
_LEN = struct.Struct("<I")
MAX_PAYLOAD = 0xFFFFFFFF


@dataclass(frozen=True)
class LayeredBitstream:
    width: int
    height: int
    compact_scale: int
    scaling: ScalingParams
    lossless_codec_id: int
    lossy_codec_id: int
    model_hash: bytes
    base: bytes
    enhancement: bytes = b""
    version: int = VERSION

    @property
    def has_enhancement(self) -> bool:
        return len(self.enhancement) > 0


def _validate(b: LayeredBitstream) -> None:
    if not (0 < b.width <= 0xFFFFFFFF and 0 < b.height <= 0xFFFFFFFF):
        raise HeaderFieldError(f"image dims must be positive u32, got {b.width}x{b.height}")
    s = b.compact_scale
    if s < 2 or s > 128 or s & (s - 1):
        raise HeaderFieldError(f"compact_scale must be a power of two in [2, 128], got {s}")
    for name in ("lossless_codec_id", "lossy_codec_id"):
        cid = getattr(b, name)
        if cid not in codecs.codec_names().values():
            raise HeaderFieldError(f"{name} {cid:#04x} is not a registered codec")
    if not codecs.is_lossless(b.lossless_codec_id):
        raise HeaderFieldError(f"base-layer codec {b.lossless_codec_id:#04x} is not lossless")
    if len(b.model_hash) != 8:
        raise HeaderFieldError(f"model hash must be 8 bytes, got {len(b.model_hash)}")
    for v in (b.scaling.r_min, b.scaling.r_max):
        if not -0x8000 <= v <= 0x7FFF:
            raise HeaderFieldError(f"scaling bound {v} does not fit in i16")


def serialize(b: LayeredBitstream) -> bytes:
    _validate(b)
    if b.version != VERSION:
        raise UnsupportedVersionError(f"cannot write version {b.version}")
    if len(b.base) > MAX_PAYLOAD or len(b.enhancement) > MAX_PAYLOAD:
        raise LengthError("layer payload exceeds 4 GiB")
    head = _HEADER.pack(
        MAGIC,
        b.version,
        b.width,
        b.height,
        b.compact_scale,
        int(b.scaling.method),
        b.scaling.r_min,
        b.scaling.r_max,
        b.lossless_codec_id,
        b.lossy_codec_id,
        bytes(b.model_hash),
        len(b.base),
    )
    return b"".join((head, b.base, _LEN.pack(len(b.enhancement)), b.enhancement))


def parse(data: bytes) -> LayeredBitstream:
    data = bytes(data)
    # a short prefix of the magic is a truncation, anything else is a foreign file
    if data[:4] != MAGIC[: len(data[:4])]:
        raise BadMagicError(f"bad magic {data[:4]!r}; not an LHIC stream")
    if len(data) < 5:
        raise TruncatedStreamError(f"stream of {len(data)} bytes ends inside the header")
    if data[4] != VERSION:
        raise UnsupportedVersionError(f"unsupported version {data[4]} (this build reads {VERSION})")
    if len(data) < HEADER_SIZE:
        raise TruncatedStreamError(f"stream of {len(data)} bytes ends inside the {HEADER_SIZE}-byte header")
    _, version, w, h, s, method, r_min, r_max, lossless_id, lossy_id, mhash, base_len = _HEADER.unpack_from(data)

    pos = HEADER_SIZE
    if base_len > len(data) - pos:
        raise LengthError(f"base_len {base_len} exceeds the {len(data) - pos} bytes remaining")
    base = data[pos : pos + base_len]
    pos += base_len
    if len(data) - pos < _LEN.size:
        raise TruncatedStreamError("stream ends before the enhancement-layer length field")
    (enh_len,) = _LEN.unpack_from(data, pos)
    pos += _LEN.size
    if enh_len != len(data) - pos:
        kind = "exceeds" if enh_len > len(data) - pos else "falls short of"
        raise LengthError(f"enh_len {enh_len} {kind} the {len(data) - pos} bytes remaining")
    enh = data[pos:]

    try:
        scaling = ScalingParams(ScalingMethod(method), r_min, r_max)
    except (ValueError, RangeError) as exc:
        raise HeaderFieldError(f"invalid scaling side info (method={method}, r_min={r_min}, r_max={r_max}): {exc}") from None
    b = LayeredBitstream(w, h, s, scaling, lossless_id, lossy_id, mhash, base, enh, version)
    _validate(b)
    return b


def bpp(b: LayeredBitstream | bytes, width: int, height: int) -> float:
    """Total serialized bits per pixel per channel (3 channels)."""
    if width <= 0 or height <= 0:
        raise ValueError(f"width and height must be positive, got {width}x{height}")
    size = len(b) if isinstance(b, (bytes, bytearray)) else len(serialize(b))
    return size * 8 / (width * height * 3)
