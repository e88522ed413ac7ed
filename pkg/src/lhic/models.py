"""CompNet / RecNet autoencoder, the quantization bridge, and checkpoint I/O.

CompNet maps an image in [-1, 1] to a 3-channel compact image at 1/s of
each side; RecNet maps the (quantized) compact image back to full size.
Each network is ``log2(s)`` sampling stages, each a stride-2 (de)convolution
plus activation followed by one residual block, then a 3x3 head
convolution with Tanh. At s = 16 that is 4 * 3 + 1 = 13 weighted layers.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ranges
from .errors import CheckpointError, ShapeError
from .nn.layers import Conv2d, ConvTranspose2d, Dropout, Module, PReLU, ReLU, Sequential, Tanh
from .nn.tensor import Tensor

ACTIVATIONS = ("prelu", "relu")
CHECKPOINT_MAGIC = b"LHICMDL1"


@dataclass(frozen=True)
class ModelConfig:
    compact_scale: int = 16
    base_filters: int = 64
    max_filters: int = 512
    dropout_p: float = 0.2
    activation: str = "prelu"
    seed: int = 0

    def __post_init__(self):
        s = self.compact_scale
        if s < 2 or s & (s - 1) or s > 128:
            raise ValueError(f"compact_scale must be a power of two in [2, 128], got {s}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not 0 <= self.dropout_p < 1:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if not 0 < self.base_filters <= self.max_filters < 1 << 16:
            raise ValueError("need 0 < base_filters <= max_filters < 65536")

    @property
    def n_stages(self) -> int:
        return self.compact_scale.bit_length() - 1

    @property
    def stage_channels(self) -> tuple[int, ...]:
        return tuple(min(self.base_filters << i, self.max_filters) for i in range(self.n_stages))

    @property
    def weighted_layers(self) -> int:
        # per stage: sampling conv + two residual convs; plus the head conv
        return 3 * self.n_stages + 1


def _activation(cfg: ModelConfig, channels: int) -> Module:
    return PReLU(channels) if cfg.activation == "prelu" else ReLU()


class ResidualBlock(Module):
    """conv -> act -> dropout -> conv, plus identity skip; no activation after the sum."""

    def __init__(self, channels: int, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv2d(channels, channels, 1, rng)
        self.act = _activation(cfg, channels)
        self.dropout = Dropout(cfg.dropout_p, seed=int(rng.integers(1 << 31)))
        self.conv2 = Conv2d(channels, channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.conv2(self.dropout(self.act(self.conv1(x))))


class CompNet(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.scale = cfg.compact_scale
        layers: list[Module] = []
        cin = 3
        for c in cfg.stage_channels:
            layers += [Conv2d(cin, c, 2, rng), _activation(cfg, c), ResidualBlock(c, cfg, rng)]
            cin = c
        layers += [Conv2d(cin, 3, 1, rng), Tanh()]
        self.body = Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"CompNet expects N x 3 x H x W, got {x.shape}")
        h, w = x.shape[2:]
        if h % self.scale or w % self.scale:
            raise ShapeError(
                f"input {h}x{w} is not divisible by compact scale {self.scale}; "
                f"pad to a multiple of {self.scale} first"
            )
        return self.body(x)


class RecNet(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        layers: list[Module] = []
        cin = 3
        for c in reversed(cfg.stage_channels):
            layers += [ConvTranspose2d(cin, c, 2, rng), _activation(cfg, c), ResidualBlock(c, cfg, rng)]
            cin = c
        layers += [Conv2d(cin, 3, 1, rng), Tanh()]
        self.body = Sequential(*layers)

    def forward(self, c: Tensor) -> Tensor:
        if c.ndim != 4 or c.shape[1] != 3:
            raise ShapeError(f"RecNet expects N x 3 x h x w, got {c.shape}")
        return self.body(c)


def count_weighted_layers(net: Module) -> int:
    return sum(isinstance(m, (Conv2d, ConvTranspose2d)) for m in net.modules())


# quantization bridge ---------------------------------------------------------


def ste_quantize(c_f: Tensor) -> Tensor:
    """Hard 8-bit quantize-dequantize forward, identity gradient backward."""
    hard = ranges.normalize_u8(ranges.quantize_unit(c_f.data)).astype(c_f.dtype)
    return Tensor._result(hard, (c_f,), lambda g: (g,))


def image_to_tensor(img: np.ndarray, dtype=np.float32) -> Tensor:
    """H x W x 3 uint8 (or N x H x W x 3) to N x 3 x H x W in [-1, 1]."""
    img = np.asarray(img)
    if img.ndim == 3:
        img = img[None]
    if img.ndim != 4 or img.shape[-1] != 3:
        raise ShapeError(f"expected H x W x 3 image(s), got shape {img.shape}")
    return Tensor(ranges.normalize_u8(img).transpose(0, 3, 1, 2), dtype=dtype)


def tensor_to_image(t: Tensor) -> np.ndarray:
    """N x 3 x H x W in [-1, 1] to uint8 images; a batch of one is squeezed to H x W x 3."""
    out = ranges.quantize_unit(t.data).transpose(0, 2, 3, 1)
    return out[0] if out.shape[0] == 1 else out


def quantize_compact(c_f: Tensor) -> np.ndarray:
    return np.ascontiguousarray(tensor_to_image(c_f))


def dequantize_compact(c: np.ndarray, dtype=np.float32) -> Tensor:
    return image_to_tensor(c, dtype)


def residual(x: np.ndarray, x_prime: np.ndarray) -> np.ndarray:
    """Signed difference ``x - x'`` of two uint8 images, in [-255, 255] as int16."""
    x, x_prime = np.asarray(x), np.asarray(x_prime)
    if x.shape != x_prime.shape:
        raise ShapeError(f"residual needs equal dims, got {x.shape} and {x_prime.shape}")
    if x.dtype != np.uint8 or x_prime.dtype != np.uint8:
        raise ShapeError(f"residual needs uint8 images, got {x.dtype} and {x_prime.dtype}")
    return x.astype(np.int16) - x_prime.astype(np.int16)


class Autoencoder(Module):
    """CompNet and RecNet trained jointly through the straight-through quantizer."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.config = cfg or ModelConfig()
        rng = np.random.default_rng(self.config.seed)
        self.compnet = CompNet(self.config, rng)
        self.recnet = RecNet(self.config, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.recnet(ste_quantize(self.compnet(x)))

    def dropouts(self) -> list[Dropout]:
        return [m for m in self.modules() if isinstance(m, Dropout)]

    def compact(self, img: np.ndarray) -> np.ndarray:
        """Padded H x W x 3 uint8 image to its (H/s) x (W/s) x 3 compact image."""
        self.eval()
        return quantize_compact(self.compnet(image_to_tensor(img)))

    def reconstruct(self, compact: np.ndarray) -> np.ndarray:
        """Compact image to the coarse H x W x 3 uint8 reconstruction."""
        self.eval()
        return tensor_to_image(self.recnet(dequantize_compact(compact)))

    def to_bytes(self) -> bytes:
        return dump_checkpoint(self)

    @property
    def model_hash(self) -> bytes:
        return model_hash(self.to_bytes())


# checkpoint format -----------------------------------------------------------
#
#   magic "LHICMDL1"
#   config: compact_scale u8, base_filters u16, max_filters u16, activation u8,
#           dropout_p f64, seed u64
#   n_params u32, then per parameter:
#           name_len u16, name utf-8, rank u8, dims u32 * rank, float32 LE values

_CONFIG = struct.Struct("<BHHBdQ")


def dump_checkpoint(model: Autoencoder) -> bytes:
    cfg = model.config
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(
        _CONFIG.pack(
            cfg.compact_scale,
            cfg.base_filters,
            cfg.max_filters,
            ACTIVATIONS.index(cfg.activation),
            cfg.dropout_p,
            cfg.seed,
        )
    )
    params = list(model.named_parameters())
    buf.write(struct.pack("<I", len(params)))
    for name, p in params:
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", p.ndim))
        buf.write(struct.pack(f"<{p.ndim}I", *p.shape))
        buf.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    return buf.getvalue()


def load_checkpoint(data: bytes) -> Autoencoder:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"checkpoint truncated at byte {pos} (wanted {n} more)")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(len(CHECKPOINT_MAGIC))) != CHECKPOINT_MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    s, base, maxf, act, p_drop, seed = _CONFIG.unpack(take(_CONFIG.size))
    if act >= len(ACTIVATIONS):
        raise CheckpointError(f"unknown activation code {act}")
    try:
        cfg = ModelConfig(s, base, maxf, p_drop, ACTIVATIONS[act], seed)
    except ValueError as exc:
        raise CheckpointError(f"invalid model config in checkpoint: {exc}") from None
    model = Autoencoder(cfg)
    (n,) = struct.unpack("<I", take(4))
    state = {}
    for _ in range(n):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode()
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        state[name] = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
    if pos != len(view):
        raise CheckpointError(f"{len(view) - pos} trailing bytes after checkpoint")
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint parameters do not match config: {exc}") from None
    return model


def save_model(model: Autoencoder, path) -> bytes:
    data = dump_checkpoint(model)
    Path(path).write_bytes(data)
    return data


def load_model(path) -> Autoencoder:
    return load_checkpoint(Path(path).read_bytes())


def model_hash(checkpoint: bytes) -> bytes:
    """First 8 bytes of SHA-256 over the checkpoint; ties bitstreams to weights."""
    return hashlib.sha256(checkpoint).digest()[:8]
