"""Throughput measurement and analytic FLOP counts.

Multiply-adds (MACs) are counted for dot products, convolutions and dense
layers only; normalizations, activations and softmax are ignored. One MAC
is two FLOPs.
"""

from __future__ import annotations

import time

import numpy as np

from .backbone import STRIDES, WIDTHS, Video, extract_pyramid
from .corr_encoder import BRANCHES, ENCODER_CONFIGS
from .correlation import QueryPoint, count_macs
from .params import init_weights
from .refiner import RADIUS, RefinerConfig
from .pipeline import TrackOptions, track_points

DEFAULT_POINTS = (1, 10, 100, 1000)


def _out(size: int, stride: int) -> int:
    return -(-size // stride)


def backbone_macs(T: int, H: int, W: int) -> int:
    total, cin, h, w = 0, 3, H, W
    for cout in WIDTHS:
        h, w = _out(h, 2), _out(w, 2)
        total += h * w * 9 * cin * cout
        cin = cout
    return T * total


def global_corr_macs(T: int, H: int, W: int, channels=WIDTHS, strides=STRIDES) -> int:
    per_frame = sum((H // s) * (W // s) * c for s, c in zip(strides, channels))
    num_levels = len(channels)
    fuse = (H // strides[0]) * (W // strides[0]) * 9 * num_levels
    return T * (per_frame + fuse)


def local_corr_macs(T: int, K: int, r: int = RADIUS, channels=WIDTHS) -> int:
    """Closed form ``K * T * (2r+1)^4 * sum_l C_l``."""
    return K * T * (2 * r + 1) ** 4 * sum(channels)


def encoder_macs(variant: str, T: int, K: int, r: int = RADIUS, num_levels: int = 3) -> int:
    cfg = ENCODER_CONFIGS[variant]
    k = 2 * r + 1
    per_branch, size, cin = 0, k, k * k
    for cout, kern, stride in zip(cfg.channels, cfg.kernels, cfg.strides):
        size = _out(size, stride)
        per_branch += size * size * kern * kern * cin * cout
        cin = cout
    return K * T * num_levels * len(BRANCHES) * per_branch


def transformer_macs(cfg: RefinerConfig, T: int) -> int:
    h, m = cfg.hidden, cfg.mlp_hidden
    per_block = 4 * T * h * h + 2 * T * T * h + 2 * T * h * m
    per_iter = T * cfg.token_dim * h + cfg.n_layers * per_block + T * h * 3
    return cfg.iterations * per_iter


def flop_report(variant: str, T: int, H: int = 256, W: int = 256, K: int = 4) -> dict:
    """Analytic FLOPs per point; the backbone is reported per video."""
    cfg = RefinerConfig.for_variant(variant, iterations=K)
    macs = {
        "global_correlation": global_corr_macs(T, H, W),
        "local_correlation": local_corr_macs(T, K),
        "correlation_encoder": encoder_macs(variant, T, K),
        "transformer": transformer_macs(cfg, T),
    }
    flops = {name: 2 * v for name, v in macs.items()}
    flops["refinement_total"] = flops["local_correlation"] + flops["correlation_encoder"] + flops["transformer"]
    flops["per_point_total"] = flops["refinement_total"] + flops["global_correlation"]
    flops["backbone_per_video"] = 2 * backbone_macs(T, H, W)
    return flops


def counted_local_macs(pyramid, query: QueryPoint, weights, opts: TrackOptions) -> int:
    """Local-correlation multiply-adds recorded while tracking one point."""
    with count_macs() as box:
        track_points(pyramid, [query], weights, opts)
    return box[0]


def run_bench(
    variant: str = "B",
    T: int = 24,
    n_points_list=DEFAULT_POINTS,
    size: tuple[int, int] = (256, 256),
    K: int = 4,
    seed: int = 0,
    workers: int | None = None,
) -> dict:
    """Time the full pipeline (backbone included) at each point count.

    Throughput is points per second of wall clock, so the per-video
    backbone cost is amortized as the point count grows.
    """
    H, W = size
    rng = np.random.default_rng(seed)
    weights = init_weights(variant, seed)
    video = Video(rng.random((T, H, W, 3), dtype=np.float32))
    opts = TrackOptions(variant=variant, iterations=K, workers=workers)
    timings = []
    for n in n_points_list:
        xs = rng.uniform(0, W - 1, n)
        ys = rng.uniform(0, H - 1, n)
        ts = rng.integers(0, T, n)
        queries = [QueryPoint(float(x), float(y), int(t)) for x, y, t in zip(xs, ys, ts)]
        start = time.perf_counter()
        pyramid = extract_pyramid(video, weights)
        track_points(pyramid, queries, weights, opts)
        seconds = time.perf_counter() - start
        timings.append({"n_points": int(n), "seconds": seconds, "points_per_sec": n / seconds})

    # the local-volume count does not depend on frame size, so a small crop suffices
    probe_pyr = extract_pyramid(Video(video.frames[:, : min(H, 64), : min(W, 64)]), weights)
    counted = counted_local_macs(probe_pyr, QueryPoint(16.0, 16.0, 0), weights, opts)
    flops = flop_report(variant, T, H, W, K)
    by_n = {t["n_points"]: t["points_per_sec"] for t in timings}
    report = {
        "variant": variant,
        "frames": T,
        "size": [H, W],
        "iterations": K,
        "timings": timings,
        "flops_per_point": flops,
        "local_corr_macs_analytic": local_corr_macs(T, K),
        "local_corr_macs_counted": counted,
    }
    if 1 in by_n and len(by_n) > 1:
        report["amortization"] = {str(n): tp / by_n[1] for n, tp in by_n.items()}
    return report
