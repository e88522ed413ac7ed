"""Deterministic synthetic RGB images for smoke tests and desk-scale experiments.

Each image mixes a colour gradient, a couple of oriented sinusoids, a few
flat discs and light noise, which gives an autoencoder something smooth to
learn and leaves a residual with real texture.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imageio import write_image


def synthetic_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)
    img = np.empty((height, width, 3))
    for c in range(3):
        a, b, base = rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(70, 180)
        img[..., c] = base + a * xx + b * yy
    for _ in range(2):
        freq = rng.uniform(1.0, 4.0)
        theta = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        img += wave[..., None] * rng.uniform(5, 25, size=3)
    for _ in range(3):
        cy, cx = rng.uniform(0, 1, size=2)
        r = rng.uniform(0.08, 0.25)
        disc = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        img[disc] = 0.5 * img[disc] + 0.5 * rng.uniform(0, 255, size=3)
    img += rng.normal(0, 2.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_corpus(directory, count: int, height: int, width: int, seed: int = 0, prefix: str = "syn") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        p = directory / f"{prefix}{i:03d}.png"
        write_image(p, synthetic_image(rng, height, width))
        paths.append(p)
    return paths
