"""Two-layer encode / decode.

Encoder: pad -> CompNet -> quantize -> lossless base layer; RecNet on the
same compact image gives the coarse reconstruction; the residual is scaled
into [0, 255] and lossily coded as the enhancement layer.

Decoder: base layer -> RecNet -> coarse image, plus the unscaled decoded
residual, clamped to [0, 255] and cropped to the original size. The only
thing passed from encoder to decoder is the :class:`LayeredBitstream`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codecs, container
from .container import LayeredBitstream
from .errors import CodecError, LHICError, ModelMismatchError
from .imageio import as_image
from .metrics import QualityReport, quality_report
from .models import Autoencoder, residual
from .ranges import CLIP_BOUND, ScalingMethod, scale_residual, unscale_residual


@dataclass(frozen=True)
class EncodeOptions:
    scaling: str = "clip"
    quality: int = 4
    lossless_codec: str = "builtin-lossless"
    lossy_codec: str = "builtin-dct"
    clip_bound: int = CLIP_BOUND
    enhancement: bool = True
    pad_mode: str = "reflect"

    def __post_init__(self):
        ScalingMethod.parse(self.scaling)
        if not codecs.is_lossless(self.lossless_codec):
            raise CodecError(f"base-layer codec {self.lossless_codec!r} must be lossless")
        codecs.get_lossy(self.lossy_codec).check_quality(self.quality)
        if self.pad_mode not in ("reflect", "edge", "symmetric"):
            raise ValueError(f"unsupported pad mode {self.pad_mode!r}")


def pad_to_multiple(img: np.ndarray, multiple: int, mode: str = "reflect") -> np.ndarray:
    h, w = img.shape[:2]
    ph, pw = -h % multiple, -w % multiple
    if not ph and not pw:
        return img
    if mode == "reflect" and min(h, w) == 1:
        mode = "symmetric"  # reflect needs two samples along each padded axis
    return np.pad(img, ((0, ph), (0, pw), (0, 0)), mode=mode)


def _stage(label: str, fn, *args):
    try:
        return fn(*args)
    except CodecError as exc:
        if exc.stage:
            raise
        raise CodecError(str(exc), stage=label, output=exc.output) from exc
    except LHICError:
        raise
    except Exception as exc:
        raise CodecError(f"{type(exc).__name__}: {exc}", stage=label) from exc


class HybridCodec:
    """Binds a trained autoencoder to the layered bitstream format.

    The model hash is computed once here; encode and decode are otherwise
    stateless, so one instance can serve many images.
    """

    def __init__(self, model: Autoencoder):
        self.model = model
        self.model_hash = model.model_hash
        self.scale = model.config.compact_scale

    def coarse(self, padded: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        compact = self.model.compact(padded)
        return compact, self.model.reconstruct(compact)

    def encode(self, img, opts: EncodeOptions | None = None) -> LayeredBitstream:
        opts = opts or EncodeOptions()
        x = as_image(img)
        h, w = x.shape[:2]
        xp = pad_to_multiple(x, self.scale, opts.pad_mode)
        compact, coarse = self.coarse(xp)

        lossless = codecs.get_lossless(opts.lossless_codec)
        base = _stage("base-encode", lossless.encode, compact)

        scaled, params = scale_residual(residual(xp, coarse), opts.scaling, opts.clip_bound)
        lossy = codecs.get_lossy(opts.lossy_codec)
        enh = _stage("enhancement-encode", lossy.encode, scaled, opts.quality) if opts.enhancement else b""

        return LayeredBitstream(
            width=w,
            height=h,
            compact_scale=self.scale,
            scaling=params,
            lossless_codec_id=lossless.codec_id,
            lossy_codec_id=lossy.codec_id,
            model_hash=self.model_hash,
            base=base,
            enhancement=enh,
        )

    def decode(self, b: LayeredBitstream | bytes, force: bool = False) -> np.ndarray:
        if isinstance(b, (bytes, bytearray, memoryview)):
            b = container.parse(bytes(b))
        if b.compact_scale != self.scale:
            raise ModelMismatchError(f"stream needs compact scale {b.compact_scale}, model has {self.scale}")
        if b.model_hash != self.model_hash and not force:
            raise ModelMismatchError(
                f"stream was encoded with model {b.model_hash.hex()}, supplied model is {self.model_hash.hex()}"
            )
        hp, wp = -(-b.height // self.scale) * self.scale, -(-b.width // self.scale) * self.scale

        compact = _stage("base-decode", codecs.get_lossless(b.lossless_codec_id).decode, b.base)
        if compact.shape != (hp // self.scale, wp // self.scale, 3):
            raise CodecError(f"compact image has shape {compact.shape}, header implies {(hp // self.scale, wp // self.scale, 3)}", stage="base-decode")
        coarse = self.model.reconstruct(compact)

        if b.has_enhancement:
            u = _stage("enhancement-decode", codecs.get_lossy(b.lossy_codec_id).decode, b.enhancement)
            if u.shape != coarse.shape:
                raise CodecError(f"enhancement layer has shape {u.shape}, expected {coarse.shape}", stage="enhancement-decode")
            out = np.clip(coarse.astype(np.int16) + unscale_residual(u, b.scaling), 0, 255).astype(np.uint8)
        else:
            out = coarse
        return np.ascontiguousarray(out[: b.height, : b.width])

    def evaluate(self, img, opts: EncodeOptions | None = None) -> tuple[bytes, np.ndarray, QualityReport]:
        """Encode, serialize, parse, decode and score one image."""
        x = as_image(img)
        data = container.serialize(self.encode(x, opts))
        decoded = self.decode(data)
        return data, decoded, quality_report(x, decoded, container.bpp(data, x.shape[1], x.shape[0]))


def encode(img, model: Autoencoder, opts: EncodeOptions | None = None) -> LayeredBitstream:
    return HybridCodec(model).encode(img, opts)


def decode(b: LayeredBitstream | bytes, model: Autoencoder, force: bool = False) -> np.ndarray:
    return HybridCodec(model).decode(b, force)

