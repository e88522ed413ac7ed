"""Layered hybrid image compression.

A convolutional autoencoder produces a compact base-layer image (coded
losslessly) and a coarse reconstruction; the residual to the original is
scaled into 8 bits and coded by a lossy enhancement-layer codec.
"""

from .container import LayeredBitstream, bpp, parse, serialize
from .metrics import QualityReport, ms_ssim, psnr
from .models import Autoencoder, ModelConfig, load_model, save_model
from .pipeline import EncodeOptions, HybridCodec, decode, encode
from .ranges import ScalingMethod, ScalingParams

__version__ = "0.1.0"

__all__ = [
    "Autoencoder",
    "EncodeOptions",
    "HybridCodec",
    "LayeredBitstream",
    "ModelConfig",
    "QualityReport",
    "ScalingMethod",
    "ScalingParams",
    "bpp",
    "decode",
    "encode",
    "load_model",
    "ms_ssim",
    "parse",
    "psnr",
    "save_model",
    "serialize",
]
