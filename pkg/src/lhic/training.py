"""Patch extraction with augmentation and the joint MSE training loop."""

from __future__ import annotations

import csv
import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .errors import NonFiniteError, ShapeError
from .imageio import IMAGE_SUFFIXES, list_images, read_image
from .models import Autoencoder, image_to_tensor, load_model, save_model
from .nn.optim import Adam
from .nn.tensor import Tensor

log = logging.getLogger(__name__)

SCALE_FACTORS = (0.75, 1.0, 1.25)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 20
    lr: float = 1e-4
    patch_size: int = 64
    patches_per_image: int = 50
    rotation: bool = True
    scaling: bool = True
    scale_factors: tuple[float, ...] = SCALE_FACTORS
    seed: int = 0
    max_steps: int | None = None
    prefetch: int = 4

    def __post_init__(self):
        for name in ("epochs", "batch_size", "patch_size", "patches_per_image", "prefetch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")


@dataclass
class PatchDataset:
    patches: np.ndarray  # N x P x P x 3 uint8
    sources: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.patches)


def rotate_patch(patch: np.ndarray, quarter_turns: int) -> np.ndarray:
    return np.rot90(patch, quarter_turns % 4, axes=(0, 1))


def _rescale(img: np.ndarray, factor: float) -> np.ndarray:
    if factor == 1.0:
        return img
    h, w = img.shape[:2]
    size = (max(1, round(w * factor)), max(1, round(h * factor)))
    return np.asarray(Image.fromarray(img).resize(size, Image.BICUBIC))


def extract_patches(directory, cfg: TrainConfig) -> PatchDataset:
    """Random crops from every lossless image in ``directory``, deterministic in ``cfg.seed``.

    Each crop draws a scale factor (when scaling is enabled) applied to the
    whole image before cropping, and a rotation of 0/90/180/270 degrees.
    """
    rng = np.random.default_rng(cfg.seed)
    p = cfg.patch_size
    patches, sources = [], []
    for path in list_images(directory, include_lossy=True):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            log.warning("skipping %s: not a lossless format", path.name)
            continue
        img = read_image(path)
        if min(img.shape[:2]) < p:
            log.warning("skipping %s: %dx%d is smaller than patch %d", path.name, img.shape[1], img.shape[0], p)
            continue
        for _ in range(cfg.patches_per_image):
            factor = float(rng.choice(cfg.scale_factors)) if cfg.scaling else 1.0
            src = _rescale(img, factor)
            if min(src.shape[:2]) < p:
                src = img
            y = int(rng.integers(0, src.shape[0] - p + 1))
            x = int(rng.integers(0, src.shape[1] - p + 1))
            crop = src[y : y + p, x : x + p]
            if cfg.rotation:
                crop = rotate_patch(crop, int(rng.integers(0, 4)))
            patches.append(np.ascontiguousarray(crop))
            sources.append(path.name)
    if not patches:
        raise ShapeError(f"no usable patches of size {p} in {directory}")
    return PatchDataset(np.stack(patches), sources)


def mse_loss(y: Tensor, x: Tensor) -> Tensor:
    """Mean squared error over batch and elements."""
    if y.shape != x.shape:
        raise ShapeError(f"loss operands differ in shape: {y.shape} vs {x.shape}")
    return (y - x).square().mean()


def smooth(values, window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` entries average what is available."""
    v = np.asarray(values, dtype=np.float64)
    c = np.cumsum(np.insert(v, 0, 0.0))
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def _batches(dataset: PatchDataset, cfg: TrainConfig, epoch: int) -> Iterator[np.ndarray]:
    order = _epoch_order(cfg.seed, epoch, len(dataset))
    for i in range(0, len(order), cfg.batch_size):
        yield dataset.patches[order[i : i + cfg.batch_size]]


def _prefetch(it: Iterator, depth: int) -> Iterator:
    """Run ``it`` on a worker thread, handing items over through a bounded queue."""
    q: queue.Queue = queue.Queue(maxsize=depth)
    done = object()
    stop = threading.Event()

    def put(item) -> bool:
        while not stop.is_set():
            try:
                q.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def worker():
        try:
            for item in it:
                if not put(item):
                    return
        finally:
            put(done)

    t = threading.Thread(target=worker, daemon=True)
    t.start()
    try:
        while (item := q.get()) is not done:
            yield item
    finally:
        stop.set()
        t.join()


@dataclass
class TrainResult:
    losses: list[float]
    checkpoints: list[Path]
    steps: int


def _state_path(ckpt: Path) -> Path:
    return ckpt.with_suffix(".state.npz")


def _save_state(path: Path, opt: Adam, epoch: int, step: int) -> None:
    arrays = {f"m/{k}": v for k, v in opt.state.m.items()}
    arrays.update({f"v/{k}": v for k, v in opt.state.v.items()})
    with open(path, "wb") as fh:
        np.savez(fh, _epoch=epoch, _step=step, _adam_t=opt.state.step, **arrays)


def _load_state(path: Path, opt: Adam) -> tuple[int, int]:
    with np.load(path) as z:
        opt.state.step = int(z["_adam_t"])
        for key in z.files:
            if key.startswith("m/"):
                opt.state.m[key[2:]] = z[key].copy()
            elif key.startswith("v/"):
                opt.state.v[key[2:]] = z[key].copy()
        return int(z["_epoch"]), int(z["_step"])


def train(
    model: Autoencoder,
    dataset: PatchDataset,
    cfg: TrainConfig,
    out_dir,
    resume_from=None,
) -> TrainResult:
    """Jointly train CompNet and RecNet with Adam on MSE.

    Writes ``train_log.csv`` (step,epoch,loss) and one checkpoint per epoch
    (``epoch_NNN.lhicm`` plus optimizer state in ``epoch_NNN.state.npz``).
    ``resume_from`` names such a checkpoint; training continues with the
    following epoch and reproduces the losses of an uninterrupted run.
    A non-finite loss stops training and raises; checkpoints already on disk
    are the last good ones.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    s = model.config.compact_scale
    if cfg.patch_size % s:
        raise ShapeError(f"patch size {cfg.patch_size} is not divisible by compact scale {s}")
    if dataset.patches.shape[1:3] != (cfg.patch_size, cfg.patch_size):
        raise ShapeError(f"dataset patches are {dataset.patches.shape[1:3]}, config says {cfg.patch_size}")

    opt = Adam(model.named_parameters(), lr=cfg.lr)
    start_epoch, step = 0, 0
    if resume_from is not None:
        resume_from = Path(resume_from)
        loaded = load_model(resume_from)
        if loaded.config != model.config:
            raise ValueError("resume checkpoint was trained with a different model config")
        model.load_state_dict(loaded.state_dict())
        last_epoch, step = _load_state(_state_path(resume_from), opt)
        start_epoch = last_epoch + 1

    log_path = out_dir / "train_log.csv"
    mode = "a" if resume_from is not None and log_path.exists() else "w"
    dropouts = model.dropouts()
    losses: list[float] = []
    checkpoints: list[Path] = []
    model.train()
    with open(log_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(["step", "epoch", "loss"])
        for epoch in range(start_epoch, cfg.epochs):
            stopped = False
            for batch in _prefetch(_batches(dataset, cfg, epoch), cfg.prefetch):
                for i, d in enumerate(dropouts):
                    d.reseed([cfg.seed, step, i])
                x = image_to_tensor(batch)
                loss = mse_loss(model(x), x)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NonFiniteError(f"loss became {value} at step {step} (epoch {epoch}); last good checkpoint kept")
                opt.zero_grad()
                loss.backward()
                opt.step()
                writer.writerow([step, epoch, repr(value)])
                losses.append(value)
                step += 1
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    stopped = True
                    break
            fh.flush()
            ckpt = out_dir / f"epoch_{epoch:03d}.lhicm"
            save_model(model, ckpt)
            _save_state(_state_path(ckpt), opt, epoch, step)
            checkpoints.append(ckpt)
            log.info("epoch %d done at step %d, mean loss %.6f", epoch, step, np.mean(losses[-50:]) if losses else float("nan"))
            if stopped:
                break
    model.eval()
    return TrainResult(losses, checkpoints, step)
