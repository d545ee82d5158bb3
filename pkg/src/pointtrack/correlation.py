"""Global (Stage I) and local 4D (Stage II) cosine-correlation volumes.

Positions passed to the ``*_4d`` functions are in the feature grid of the
level being correlated; everything else takes input-pixel coordinates and
divides by the level stride.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass

import numpy as np

from .backbone import FeaturePyramid
from .numerics import bilinear_sample, l2_normalize, resize_to

NORM_FLOOR = 1e-8

_mac_counter: contextvars.ContextVar[list | None] = contextvars.ContextVar("mac_counter", default=None)


@contextlib.contextmanager
def count_macs():
    """Count multiply-adds spent in local-correlation dot products.

    Yields a one-element list whose value grows as local volumes are built
    inside the ``with`` block.
    """
    box = [0]
    token = _mac_counter.set(box)
    try:
        yield box
    finally:
        _mac_counter.reset(token)


def _record_macs(n: int) -> None:
    box = _mac_counter.get()
    if box is not None:
        box[0] += n


@dataclass(frozen=True)
class QueryPoint:
    x: float
    y: float
    t: int


@dataclass(frozen=True)
class LocalCorr4D:
    """``vol[i_y, i_x, j_y, j_x]``: target offset ``i`` around ``center_p``,
    query offset ``j`` around ``center_q``."""

    vol: np.ndarray
    center_p: tuple[float, float]
    center_q: tuple[float, float]
    level: int = 0


def _normalize(v: np.ndarray) -> np.ndarray:
    return l2_normalize(v, NORM_FLOOR)


def neighborhood(center, r: int) -> np.ndarray:
    """Points ``center + d`` for integer offsets ``|d|_inf <= r``, row-major in (dy, dx)."""
    d = np.arange(-r, r + 1, dtype=np.float64)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    return np.stack([center[0] + dx.ravel(), center[1] + dy.ravel()], axis=-1)


def global_correlation(pyr: FeaturePyramid, q: QueryPoint) -> np.ndarray:
    """Cosine similarity of every cell against the query feature, per level.

    Returns:
        ``[T, H0, W0, L]``: levels resampled onto the level-0 grid and
        stacked on the last axis.
    """
    return global_correlation_batch(pyr, [q])[0]


def global_correlation_batch(pyr: FeaturePyramid, queries) -> np.ndarray:
    """:func:`global_correlation` for several queries sharing one matrix product.

    Returns:
        ``[N, T, H0, W0, L]``.
    """
    t_count = pyr.num_frames
    for q in queries:
        if not 0 <= q.t < t_count:
            raise ValueError(f"query frame {q.t} outside [0, {t_count})")
    n = len(queries)
    h0, w0 = pyr.levels[0].shape[1:3]
    s0 = pyr.strides[0]
    out = np.empty((n, t_count, h0, w0, pyr.num_levels), np.float32)
    for l, (feats, unit, s) in enumerate(zip(pyr.levels, pyr.unit_levels(), pyr.strides)):
        qf = np.stack([bilinear_sample(feats[q.t], [(q.x / s, q.y / s)])[0] for q in queries])
        cos = unit @ _normalize(qf).T  # [T, h, w, N]
        if l == 0:
            out[..., l] = np.moveaxis(cos, -1, 0)
            continue
        h, w = cos.shape[1:3]
        # frames and queries ride along as channels so one resample covers them all
        chans = np.moveaxis(cos, 0, -1).reshape(h, w, n * t_count)
        up = resize_to(chans, (h0, w0), s0 / s).reshape(h0, w0, n, t_count)
        out[..., l] = up.transpose(2, 3, 0, 1)
    return out


def local_corr_4d(feat_t, feat_tq, p, q, r_p: int = 3, r_q: int = 3, level: int = 0) -> LocalCorr4D:
    """All-pair cosine similarity between the neighborhoods of ``p`` and ``q``.

    ``p`` indexes ``feat_t`` and ``q`` indexes ``feat_tq``; both may be
    fractional and are bilinearly sampled, clamped at the borders.
    """
    if r_p < 0 or r_q < 0:
        raise ValueError("radii must be non-negative")
    a = _normalize(bilinear_sample(feat_t, neighborhood(p, r_p)))
    b = _normalize(bilinear_sample(feat_tq, neighborhood(q, r_q)))
    _record_macs(a.shape[0] * b.shape[0] * a.shape[1])
    kp, kq = 2 * r_p + 1, 2 * r_q + 1
    vol = (a @ b.T).reshape(kp, kp, kq, kq)
    return LocalCorr4D(vol, (float(p[0]), float(p[1])), (float(q[0]), float(q[1])), level)


def _sample_oracle(fmap: np.ndarray, x: float, y: float) -> list[float]:
    h, w, c = fmap.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    ax, ay = x - x0, y - y0
    out = []
    for k in range(c):
        v = (
            float(fmap[y0, x0, k]) * (1 - ax) * (1 - ay)
            + float(fmap[y0, x1, k]) * ax * (1 - ay)
            + float(fmap[y1, x0, k]) * (1 - ax) * ay
            + float(fmap[y1, x1, k]) * ax * ay
        )
        out.append(v)
    return out


def local_corr_4d_oracle(feat_t, feat_tq, p, q, r_p: int = 3, r_q: int = 3, level: int = 0) -> LocalCorr4D:
    """Reference for :func:`local_corr_4d` written as plain nested loops."""
    kp, kq = 2 * r_p + 1, 2 * r_q + 1
    vol = np.zeros((kp, kp, kq, kq), np.float64)
    for iy in range(kp):
        for ix in range(kp):
            a = _sample_oracle(feat_t, p[0] + ix - r_p, p[1] + iy - r_p)
            for jy in range(kq):
                for jx in range(kq):
                    b = _sample_oracle(feat_tq, q[0] + jx - r_q, q[1] + jy - r_q)
                    dot = na = nb = 0.0
                    for u, v in zip(a, b):
                        dot += u * v
                        na += u * u
                        nb += v * v
                    na = max(math.sqrt(na), NORM_FLOOR)
                    nb = max(math.sqrt(nb), NORM_FLOOR)
                    vol[iy, ix, jy, jx] = dot / (na * nb)
    return LocalCorr4D(vol.astype(np.float32), (float(p[0]), float(p[1])), (float(q[0]), float(q[1])), level)


def transpose_corr(c: LocalCorr4D) -> LocalCorr4D:
    """Swap the target and query axes (and centers)."""
    return LocalCorr4D(np.ascontiguousarray(c.vol.transpose(2, 3, 0, 1)), c.center_q, c.center_p, c.level)


def track_local_volumes(pyr: FeaturePyramid, track: np.ndarray, q: QueryPoint, r: int = 3) -> list[np.ndarray]:
    """Local 4D volumes for every frame and level along ``track``.

    The query side is centered on ``q`` in frame ``q.t`` for every frame;
    the target side on ``track[t]``. ``track`` is in input pixels.

    Returns:
        One ``[T, k, k, k, k]`` array per level, ``k = 2r + 1``.
    """
    k = 2 * r + 1
    out = []
    for feats, s in zip(pyr.levels, pyr.strides):
        b = _normalize(bilinear_sample(feats[q.t], neighborhood((q.x / s, q.y / s), r)))
        vols = np.empty((len(track), k, k, k, k), np.float32)
        for t, (x, y) in enumerate(track):
            a = _normalize(bilinear_sample(feats[t], neighborhood((x / s, y / s), r)))
            vols[t] = (a @ b.T).reshape(k, k, k, k)
        _record_macs(len(track) * k**4 * feats.shape[-1])
        out.append(vols)
    return out
