"""Stage I: initial track and occlusion logits from global correlation."""

from __future__ import annotations

import numpy as np

from .numerics import conv2d, linear
from .weights import WeightsContainer

TAU = 20.0
SIGMA_G = 2.5
TIE_TOL = 1e-6


def hard_argmax(cmap: np.ndarray, tie_break: str = "scan") -> tuple[int, int]:
    """Row/column of the maximum.

    ``"scan"`` takes the first maximum in scan order. ``"center"`` treats
    values within ``TIE_TOL`` of the maximum as tied and takes the one
    nearest the map centre, so rounding noise on a flat map cannot pick a
    corner.
    """
    if tie_break == "scan":
        return np.unravel_index(np.argmax(cmap), cmap.shape)
    if tie_break != "center":
        raise ValueError(f"unknown tie_break {tie_break!r}")
    h, w = cmap.shape
    ys, xs = np.nonzero(cmap >= cmap.max() - TIE_TOL)
    d2 = (ys - (h - 1) / 2) ** 2 + (xs - (w - 1) / 2) ** 2
    k = int(np.argmin(d2))
    return ys[k], xs[k]


def _window_logits(cmap: np.ndarray, tau: float, sigma_g: float, tie_break: str = "scan"):
    cmap = np.asarray(cmap, dtype=np.float64)
    h, w = cmap.shape
    my, mx = hard_argmax(cmap, tie_break)
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    d2 = (xs - mx) ** 2 + (ys - my) ** 2
    logits = tau * cmap - d2 / (2.0 * sigma_g**2)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    return p, xs, ys


def kernel_softargmax(
    cmap: np.ndarray, tau: float = TAU, sigma_g: float = SIGMA_G, tie_break: str = "scan"
) -> tuple[float, float]:
    """Softmax expectation of cell coordinates, windowed around the hard argmax.

    Cell weights are ``exp(-|i - m|^2 / (2 sigma_g^2)) * exp(tau * cmap[i])``
    where ``m`` is the maximum chosen by :func:`hard_argmax`. The result
    ``(x, y)`` is in the map's own grid units.
    """
    p, xs, ys = _window_logits(cmap, tau, sigma_g, tie_break)
    return float((p * xs).sum()), float((p * ys).sum())


def kernel_softargmax_grad(
    cmap: np.ndarray, tau: float = TAU, sigma_g: float = SIGMA_G, tie_break: str = "scan"
) -> np.ndarray:
    """Jacobian of :func:`kernel_softargmax` w.r.t. ``cmap``, shape ``[2, H, W]``.

    The Gaussian window is held fixed (the hard argmax is not differentiable).
    """
    p, xs, ys = _window_logits(cmap, tau, sigma_g, tie_break)
    ex, ey = (p * xs).sum(), (p * ys).sum()
    return np.stack([tau * p * (xs - ex), tau * p * (ys - ey)])


def init_head_manifest(num_levels: int = 3) -> dict[str, tuple[int, ...]]:
    return {
        "init.fuse.weight": (3, 3, num_levels, 1),
        "init.fuse.bias": (1,),
        "init.occ.weight": (2 * num_levels, 1),
        "init.occ.bias": (1,),
    }


def init_track(
    gc: np.ndarray,
    weights: WeightsContainer,
    tau: float = TAU,
    sigma_g: float = SIGMA_G,
    stride: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Fuse the correlation levels and read off one position per frame.

    Args:
        gc: ``[T, H0, W0, L]`` global correlation.
        stride: pixels per level-0 cell.

    Returns:
        ``(track [T, 2] in pixels, occlusion logits [T])``.
    """
    fuse_w, fuse_b = weights["init.fuse.weight"], weights["init.fuse.bias"]
    occ_w, occ_b = weights["init.occ.weight"], weights["init.occ.bias"]
    fused = conv2d(gc, fuse_w, stride=1, padding="same", bias=fuse_b)[..., 0]
    track = np.array([kernel_softargmax(m, tau, sigma_g) for m in fused], dtype=np.float32) * stride
    pooled = np.concatenate([gc.max(axis=(1, 2)), gc.mean(axis=(1, 2))], axis=-1)
    occl = linear(pooled, occ_w, occ_b)[:, 0]
    return track, occl
