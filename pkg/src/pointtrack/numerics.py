"""Deterministic float32 tensor kernels.

Tensors are plain ``numpy.ndarray`` values in row-major (channels-last)
layout. Every function here is pure: inputs are never mutated.
"""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np

GROUP_NORM_EPS = 1e-5
NUM_FREQUENCIES = 10
ENCODING_WIDTH = 1 + 2 * NUM_FREQUENCIES

Padding = Literal["same", "valid"]


def as_tensor(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float32)


def _same_pads(size: int, k: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv2d(
    x: np.ndarray,
    kernel: np.ndarray,
    stride: int = 1,
    padding: Padding = "same",
    bias: np.ndarray | None = None,
) -> np.ndarray:
    """2D cross-correlation over channels-last input.

    Args:
        x: ``[..., H, W, Cin]``; leading axes are treated as a batch.
        kernel: ``[kh, kw, Cin, Cout]``.
        stride: spatial stride, same on both axes.
        padding: ``"same"`` gives ``ceil(H / stride)`` outputs (zero padding,
            extra pad on the bottom/right); ``"valid"`` gives
            ``floor((H - kh) / stride) + 1``.
        bias: optional ``[Cout]``.

    Returns:
        ``[..., H', W', Cout]`` float32 tensor.
    """
    x = as_tensor(x)
    kernel = as_tensor(kernel)
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if kernel.ndim != 4:
        raise ValueError(f"kernel must be [kh, kw, Cin, Cout], got shape {kernel.shape}")
    if x.ndim < 3:
        raise ValueError(f"input must be [..., H, W, Cin], got shape {x.shape}")
    kh, kw, cin, cout = kernel.shape
    if x.shape[-1] != cin:
        raise ValueError(
            f"channel mismatch: input has Cin={x.shape[-1]} (shape {x.shape}), "
            f"kernel expects Cin={cin} (shape {kernel.shape})"
        )
    h, w = x.shape[-3], x.shape[-2]
    if padding == "same":
        pt, pb = _same_pads(h, kh, stride)
        pl, pr = _same_pads(w, kw, stride)
        pad = [(0, 0)] * (x.ndim - 3) + [(pt, pb), (pl, pr), (0, 0)]
        x = np.pad(x, pad)
    elif padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    hp, wp = x.shape[-3], x.shape[-2]
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")

    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(-3, -2))
    windows = windows[..., ::stride, ::stride, :, :, :]
    # windows: [..., H', W', Cin, kh, kw]
    out = np.einsum("...cij,ijco->...o", windows, kernel, optimize=True)
    if bias is not None:
        out = out + as_tensor(bias)
    return np.ascontiguousarray(out, dtype=np.float32)


def group_norm(
    x: np.ndarray,
    groups: int,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = GROUP_NORM_EPS,
) -> np.ndarray:
    """Group normalization over ``[..., H, W, C]`` with per-channel affine."""
    x = as_tensor(x)
    c = x.shape[-1]
    if groups < 1 or c % groups:
        raise ValueError(f"{c} channels not divisible into {groups} groups")
    lead = x.shape[:-3]
    g = x.reshape(*lead, x.shape[-3] * x.shape[-2], groups, c // groups).astype(np.float64)
    mean = g.mean(axis=(-3, -1), keepdims=True)
    var = g.var(axis=(-3, -1), keepdims=True)
    g = (g - mean) / np.sqrt(var + eps)
    out = g.reshape(x.shape) * as_tensor(gamma) + as_tensor(beta)
    return out.astype(np.float32)


def instance_norm(x: np.ndarray, eps: float = GROUP_NORM_EPS) -> np.ndarray:
    """Per-channel normalization over the spatial extent, no affine."""
    c = x.shape[-1]
    return group_norm(x, c, np.ones(c, np.float32), np.zeros(c, np.float32), eps)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    x = as_tensor(x).astype(np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    out = (x - mean) / np.sqrt(var + eps) * gamma + beta
    return out.astype(np.float32)


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Affine map along the last axis: ``x @ weight + bias``."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input trailing dim {x.shape[-1]} vs weight shape {weight.shape}")
    out = x @ weight
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise ValueError(f"linear: bias shape {bias.shape} vs Dout={weight.shape[1]}")
        out = out + bias
    return out.astype(np.float32)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, np.float32(0.0))


def gelu(x: np.ndarray) -> np.ndarray:
    x = as_tensor(x)
    c = np.float32(math.sqrt(2.0 / math.pi))
    return (0.5 * x * (1.0 + np.tanh(c * (x + np.float32(0.044715) * x**3)))).astype(np.float32)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax. ``-inf`` entries map to exactly 0."""
    x = np.asarray(x, dtype=np.float32)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, np.float32(0.0))
    e = np.exp(x - m)
    return (e / np.sum(e, axis=axis, keepdims=True)).astype(np.float32)


def bilinear_sample(fmap: np.ndarray, pts) -> np.ndarray:
    """Sample ``fmap[H, W, C]`` at ``pts`` given as ``(x, y)`` pairs.

    Coordinates are clamped to ``[0, W-1] x [0, H-1]`` before interpolation,
    so out-of-range points take the value of the nearest border.

    Returns:
        ``[N, C]`` float32 tensor.
    """
    fmap = as_tensor(fmap)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    h, w = fmap.shape[:2]
    x = np.clip(pts[:, 0], 0.0, w - 1)
    y = np.clip(pts[:, 1], 0.0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = fmap[y0, x0] * (1 - fx) + fmap[y0, x1] * fx
    bot = fmap[y1, x0] * (1 - fx) + fmap[y1, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def l2_normalize(v: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Scale vectors on the last axis to unit length; norms below ``floor`` are clamped."""
    v = np.asarray(v, dtype=np.float32)
    n = np.sqrt(np.einsum("...c,...c->...", v, v))[..., None]
    return v / np.maximum(n, np.float32(floor))


def sinusoidal_encode(x) -> np.ndarray:
    """Encode scalar(s) as ``[x, sin(2^0 x), cos(2^0 x), ..., sin(2^9 x), cos(2^9 x)]``.

    Accepts a scalar or an array; the 21 channels are appended as a new
    trailing axis.
    """
    x = np.asarray(x, dtype=np.float64)
    freqs = 2.0 ** np.arange(NUM_FREQUENCIES)
    ang = x[..., None] * freqs
    pairs = np.stack([np.sin(ang), np.cos(ang)], axis=-1).reshape(*x.shape, 2 * NUM_FREQUENCIES)
    return np.concatenate([x[..., None], pairs], axis=-1).astype(np.float32)


def resize_to(fmap: np.ndarray, out_hw: Sequence[int], scale: float) -> np.ndarray:
    """Resample ``fmap[H, W, C]`` onto an ``out_hw`` grid.

    Output cell ``(i, j)`` reads input coordinate ``(j * scale, i * scale)``,
    i.e. ``scale`` is the ratio of output to input cell size.
    """
    oh, ow = out_hw
    ys, xs = np.meshgrid(np.arange(oh) * scale, np.arange(ow) * scale, indexing="ij")
    pts = np.stack([xs.ravel(), ys.ravel()], axis=-1)
    return bilinear_sample(fmap, pts).reshape(oh, ow, fmap.shape[-1])
