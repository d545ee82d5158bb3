"""End-to-end tracking and evaluation drivers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io
from .backbone import Video, extract_pyramid, patch_identity_pyramid
from .correlation import QueryPoint, global_correlation_batch
from .metrics import MetricsReport, evaluate, sample_queries
from .numerics import sigmoid
from .params import init_weights, manifest
from .refiner import RefinerConfig, iterate
from .track_init import init_track
from .weights import WeightsContainer, load_weights

WORKERS_ENV = "POINTTRACK_WORKERS"
BACKBONES = ("learned", "patch")
REFINERS = ("learned", "argmax")
CHUNK = 8


@dataclass(frozen=True)
class TrackOptions:
    variant: str = "B"
    refiner: str = "learned"
    iterations: int = 4
    backbone: str = "learned"
    workers: int | None = None
    keep_history: bool = True

    def __post_init__(self):
        if self.refiner not in REFINERS:
            raise ValueError(f"unknown refiner {self.refiner!r}, expected one of {REFINERS}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}, expected one of {BACKBONES}")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    return max(n, 1)


def build_pyramid(video: Video, weights: WeightsContainer, backbone: str = "learned"):
    if backbone == "patch":
        return patch_identity_pyramid(video)
    return extract_pyramid(video, weights)


def track_points(pyramid, queries, weights: WeightsContainer, opts: TrackOptions):
    """Track every query through a precomputed pyramid.

    Returns:
        One ``(track [T, 2], occl_logits [T], history)`` per query, in query order.
    """
    cfg = RefinerConfig.for_variant(opts.variant, iterations=opts.iterations)
    pyramid.unit_levels()  # fill the shared cache before threads read it

    def run_chunk(chunk):
        out = []
        for q, gc in zip(chunk, global_correlation_batch(pyramid, chunk)):
            track0, occl0 = init_track(gc, weights, stride=pyramid.strides[0])
            out.append(iterate(track0, occl0, pyramid, q, weights, cfg, refiner=opts.refiner))
        return out

    chunks = [list(queries[i:i + CHUNK]) for i in range(0, len(queries), CHUNK)]
    workers = opts.workers or default_workers()
    if workers == 1 or len(chunks) <= 1:
        parts = [run_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, chunks))
    return [r for part in parts for r in part]


def resolve_weights(weights_path, variant: str, seed: int = 0) -> WeightsContainer:
    if weights_path is None:
        return init_weights(variant, seed)
    return load_weights(weights_path, manifest(variant))


def run_track(
    video_path,
    queries_path,
    weights_path=None,
    variant: str = "B",
    refiner: str = "learned",
    K: int = 4,
    out_path=None,
    backbone: str = "learned",
    seed: int = 0,
    workers: int | None = None,
    keep_history: bool = True,
    render_overlays=None,
) -> dict:
    """Track the queries in a video file and optionally write the track document.

    Without ``weights_path`` the model is seeded from ``seed``.
    """
    opts = TrackOptions(variant, refiner, K, backbone, workers, keep_history)
    video = io.load_video(video_path)
    ids, queries = io.load_queries(queries_path)
    for tid, q in zip(ids, queries):
        if not 0 <= q.t < video.num_frames:
            raise io.FormatError(f"{queries_path}: query {tid} frame {q.t} outside [0, {video.num_frames})")
    weights = resolve_weights(weights_path, variant, seed)
    pyramid = build_pyramid(video, weights, backbone)
    results = track_points(pyramid, queries, weights, opts)
    rows = [
        (tid, q, track, sigmoid(occl).astype(np.float32), history if keep_history else None)
        for tid, q, (track, occl, history) in zip(ids, queries, results)
    ]
    meta = {"variant": variant, "refiner": refiner, "iterations": K, "backbone": backbone}
    if weights_path is None:
        meta["seed"] = seed
    doc = io.tracks_document(rows, video.size, meta)
    if out_path is not None:
        io.save_tracks(doc, out_path)
    if render_overlays is not None:
        from .plotting import render_overlays as draw

        draw(video, doc, render_overlays)
    return doc


def prob_to_logit(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


def run_eval(pred_path, gt_path, mode: str = "strided", convention: str = "frame") -> MetricsReport:
    """Score a track file against ground truth.

    Each ground-truth track is queried per :func:`sample_queries`; the track
    file must hold a prediction for every ``(track_id, query frame)`` pair.
    All frames, including the query frame, are scored.
    """
    doc = io.load_tracks(pred_path)
    image_size, gts = io.load_ground_truth(gt_path)
    by_key = {(int(e["track_id"]), e["query"].t): e for e in doc["tracks"]}
    pairs = []
    for tid, gt in gts.items():
        for q in sample_queries(gt, mode):
            entry = by_key.get((tid, q.t))
            if entry is None:
                raise io.FormatError(f"{pred_path}: no prediction for track {tid} queried at frame {q.t}")
            if len(entry["track"]) != len(gt.visible):
                raise io.FormatError(
                    f"{pred_path}: track {tid} has {len(entry['track'])} frames, ground truth {len(gt.visible)}"
                )
            pairs.append((entry["track"], prob_to_logit(entry["occl_prob"]), gt))
    return evaluate(pairs, image_size, convention)


def synth_queries(gts) -> tuple[list[int], list[QueryPoint]]:
    """Union of strided and first-visible queries for every track, in (track, frame) order."""
    ids, queries = [], []
    for tid, gt in enumerate(gts):
        seen = set()
        for q in sample_queries(gt, "strided") + sample_queries(gt, "first"):
            if q.t not in seen:
                seen.add(q.t)
                ids.append(tid)
                queries.append(q)
    order = sorted(range(len(ids)), key=lambda k: (ids[k], queries[k].t))
    return [ids[k] for k in order], [queries[k] for k in order]
