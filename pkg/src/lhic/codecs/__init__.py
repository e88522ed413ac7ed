"""Layer codecs: a lossless coder for the compact image, a lossy coder for the residual."""

from .base import (
    BPG_ID,
    BUILTIN_DCT_ID,
    BUILTIN_LOSSLESS_ID,
    FLIF_ID,
    LosslessAsLossy,
    LosslessCodec,
    LossyCodec,
    codec_names,
    get_lossless,
    get_lossy,
    is_lossless,
    register,
)
from .builtin import BlockDCTCodec, PredictiveLossless
from .external import BpgCodec, ExternalToolConfig, FlifCodec

register(BUILTIN_LOSSLESS_ID, PredictiveLossless.name, True, PredictiveLossless)
register(FLIF_ID, FlifCodec.name, True, FlifCodec)
register(BUILTIN_DCT_ID, BlockDCTCodec.name, False, BlockDCTCodec)
register(BPG_ID, BpgCodec.name, False, BpgCodec)

__all__ = [
    "BPG_ID",
    "BUILTIN_DCT_ID",
    "BUILTIN_LOSSLESS_ID",
    "FLIF_ID",
    "BlockDCTCodec",
    "BpgCodec",
    "ExternalToolConfig",
    "FlifCodec",
    "LosslessAsLossy",
    "LosslessCodec",
    "LossyCodec",
    "PredictiveLossless",
    "codec_names",
    "get_lossless",
    "get_lossy",
    "is_lossless",
    "register",
]
