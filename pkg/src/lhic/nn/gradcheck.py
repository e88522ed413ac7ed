"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_gradient(
    loss_fn: Callable[[], float], arr: np.ndarray, indices: Sequence[tuple[int, ...]], h: float = 1e-6
) -> np.ndarray:
    """d loss / d arr[idx] by central differences, perturbing ``arr`` in place."""
    out = np.empty(len(indices))
    for k, idx in enumerate(indices):
        orig = arr[idx]
        arr[idx] = orig + h
        fp = loss_fn()
        arr[idx] = orig - h
        fm = loss_fn()
        arr[idx] = orig
        out[k] = (fp - fm) / (2 * h)
    return out


def check_gradients(
    forward: Callable[[], Tensor],
    tensors: dict[str, Tensor],
    max_entries: int | None = 16,
    h: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Compare autodiff gradients of the scalar ``forward()`` against central differences.

    For each named tensor up to ``max_entries`` entries are sampled (all of
    them when ``None``). Returns the relative error
    ``|analytic - numeric| / max(|analytic|, |numeric|)`` measured as vector
    norms over the sampled entries; 0.0 when both vanish.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for t in tensors.values():
        t.grad = None
    forward().backward()
    analytic = {n: (t.grad if t.grad is not None else np.zeros_like(t.data)).copy() for n, t in tensors.items()}

    def loss_value() -> float:
        return float(forward().data)

    errors = {}
    for name, t in tensors.items():
        flat = np.arange(t.data.size)
        if max_entries is not None and flat.size > max_entries:
            flat = np.sort(rng.choice(flat, size=max_entries, replace=False))
        idx = [np.unravel_index(i, t.shape) for i in flat]
        num = numerical_gradient(loss_value, t.data, idx, h)
        ana = np.array([analytic[name][i] for i in idx])
        denom = max(np.linalg.norm(ana), np.linalg.norm(num))
        errors[name] = 0.0 if denom == 0 else float(np.linalg.norm(ana - num) / denom)
    return errors
