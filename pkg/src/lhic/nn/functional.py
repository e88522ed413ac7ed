"""Differentiable operations used by the autoencoder.

All spatial ops use 3x3 kernels with zero padding of 1. Activations are in
N, C, H, W order. Convolution weights are ``(out, in, 3, 3)``; transposed
convolution weights are ``(in, out, 3, 3)`` so that the same array drives
a convolution and its adjoint.
"""

from __future__ import annotations

import numpy as np

from ..errors import RangeError, ShapeError
from .tensor import Tensor

KERNEL = 3
PAD = 1


def _check_stride(stride: int) -> None:
    if stride not in (1, 2):
        raise ShapeError(f"stride must be 1 or 2, got {stride}")


def _im2col(x: np.ndarray, stride: int, out_hw: tuple[int, int]) -> np.ndarray:
    """Gather 3x3 neighbourhoods into a ``(C*9, N*Ho*Wo)`` matrix."""
    ho, wo = out_hw
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    win = win[:, :, : stride * ho : stride, : stride * wo : stride]
    n, c = x.shape[:2]
    return win.transpose(1, 4, 5, 0, 2, 3).reshape(c * KERNEL * KERNEL, n * ho * wo)


def _col2im(cols: np.ndarray, x_shape: tuple[int, ...], stride: int, out_hw: tuple[int, int]) -> np.ndarray:
    n, c, h, w = x_shape
    ho, wo = out_hw
    cols = cols.reshape(c, KERNEL, KERNEL, n, ho, wo)
    xp = np.zeros((n, c, h + 2 * PAD, w + 2 * PAD), dtype=cols.dtype)
    for i in range(KERNEL):
        for j in range(KERNEL):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, i, j].transpose(1, 0, 2, 3)
    return xp[:, :, PAD : PAD + h, PAD : PAD + w]


def _conv_out_hw(h: int, w: int, stride: int) -> tuple[int, int]:
    return (h + 2 * PAD - KERNEL) // stride + 1, (w + 2 * PAD - KERNEL) // stride + 1


def _conv_fwd(x: np.ndarray, w: np.ndarray, stride: int):
    n = x.shape[0]
    cout = w.shape[0]
    ho, wo = _conv_out_hw(x.shape[2], x.shape[3], stride)
    cols = _im2col(x, stride, (ho, wo))
    out = (w.reshape(cout, -1) @ cols).reshape(cout, n, ho, wo).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out), cols


def _conv_input_grad(g: np.ndarray, w: np.ndarray, x_shape, stride: int) -> np.ndarray:
    cout = w.shape[0]
    ho, wo = g.shape[2:]
    g2 = g.transpose(1, 0, 2, 3).reshape(cout, -1)
    return _col2im(w.reshape(cout, -1).T @ g2, x_shape, stride, (ho, wo))


def _conv_weight_grad(g: np.ndarray, cols: np.ndarray, w_shape) -> np.ndarray:
    cout = g.shape[1]
    g2 = g.transpose(1, 0, 2, 3).reshape(cout, -1)
    return (g2 @ cols.T).reshape(w_shape)


def _check_conv_shapes(x: Tensor, w: Tensor, b: Tensor | None, stride: int, *, transposed: bool) -> None:
    _check_stride(stride)
    if x.ndim != 4:
        raise ShapeError(f"input must be N x C x H x W, got rank {x.ndim} shape {x.shape}")
    if w.ndim != 4 or w.shape[2:] != (KERNEL, KERNEL):
        raise ShapeError(f"weight must be ? x ? x 3 x 3, got shape {w.shape}")
    cin = w.shape[0] if transposed else w.shape[1]
    if x.shape[1] != cin:
        raise ShapeError(f"input channels {x.shape[1]} do not match weight in-channels {cin} (weight {w.shape})")
    cout = w.shape[1] if transposed else w.shape[0]
    if b is not None and b.shape != (cout,):
        raise ShapeError(f"bias shape {b.shape} does not match out-channels {cout}")
    if not transposed:
        h, wd = x.shape[2:]
        if h % stride or wd % stride:
            raise ShapeError(f"spatial dims H={h}, W={wd} are not divisible by stride {stride}")


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1) -> Tensor:
    """3x3 convolution with same-padding; stride 2 halves H and W."""
    _check_conv_shapes(x, w, b, stride, transposed=False)
    xd, wd = x.data, w.data
    out, cols = _conv_fwd(xd, wd, stride)
    if b is not None:
        out += b.data[None, :, None, None]

    def backward(g):
        gx = _conv_input_grad(g, wd, xd.shape, stride) if x.requires_grad else None
        gw = _conv_weight_grad(g, cols, wd.shape) if w.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._result(out, parents, backward)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 2) -> Tensor:
    """Adjoint of :func:`conv2d` with the same weight array; stride 2 doubles H and W.

    ``w`` has shape ``(in, out, 3, 3)``.
    """
    _check_conv_shapes(x, w, b, stride, transposed=True)
    xd, wd = x.data, w.data
    n, _, h, wdth = xd.shape
    out_shape = (n, wd.shape[1], h * stride, wdth * stride)
    out = _conv_input_grad(xd, wd, out_shape, stride)
    if b is not None:
        out = out + b.data[None, :, None, None]

    def backward(g):
        gx = gw = None
        if x.requires_grad:
            gx, _ = _conv_fwd(g, wd, stride)
        if w.requires_grad:
            gw = _conv_weight_grad(xd, _im2col(g, stride, (h, wdth)), wd.shape)
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return gx, gw, gb

    parents = (x, w) if b is None else (x, w, b)
    return Tensor._result(np.ascontiguousarray(out), parents, backward)


def relu(x: Tensor) -> Tensor:
    xd = x.data
    mask = xd > 0
    return Tensor._result(np.where(mask, xd, 0).astype(xd.dtype), (x,), lambda g: (g * mask,))


def prelu(x: Tensor, a: Tensor) -> Tensor:
    """Per-channel parametric ReLU: ``x`` where positive, ``a * x`` elsewhere."""
    if x.ndim < 2 or a.shape != (x.shape[1],):
        raise ShapeError(f"prelu slope shape {a.shape} does not match channel count of input {x.shape}")
    xd = x.data
    ad = a.data.reshape((1, -1) + (1,) * (x.ndim - 2))
    mask = xd > 0
    out = np.where(mask, xd, ad * xd)
    reduce_axes = (0,) + tuple(range(2, x.ndim))

    def backward(g):
        gx = np.where(mask, g, ad * g)
        ga = np.where(mask, 0, xd * g).sum(axis=reduce_axes)
        return gx, ga

    return Tensor._result(out, (x, a), backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor._result(y, (x,), lambda g: (g * (1 - y * y),))


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | int | None = None) -> Tensor:
    """Inverted dropout; the identity outside training or when ``p == 0``."""
    if not 0 <= p < 1:
        raise RangeError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = rng.random(x.shape) >= p
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    mask = keep * scale
    return Tensor._result(x.data * mask, (x,), lambda g: (g * mask,))
