"""Position accuracy, occlusion accuracy and average Jaccard for point tracks.

All distances are measured after rescaling both tracks to a 256x256 frame,
so the thresholds 1, 2, 4, 8, 16 are resolution independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlation import QueryPoint
from .numerics import sigmoid

THRESHOLDS = (1, 2, 4, 8, 16)
EVAL_SIZE = 256
QUERY_STRIDE = 5


@dataclass(frozen=True)
class GroundTruthTrack:
    positions: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float32)
        vis = np.asarray(self.visible, dtype=bool)
        if pos.shape != (len(vis), 2):
            raise ValueError(f"positions {pos.shape} do not match {len(vis)} visibility flags")
        if not np.all(np.isfinite(pos[vis])):
            raise ValueError("non-finite ground-truth position on a visible frame")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "visible", vis)


@dataclass
class MetricsReport:
    aj: float
    pck_avg: float
    pck_per_threshold: list[float]
    oa: float
    n_points: int
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "aj": self.aj,
            "pck_avg": self.pck_avg,
            "pck_per_threshold": dict(zip(map(str, THRESHOLDS), self.pck_per_threshold)),
            "oa": self.oa,
            "n_points": self.n_points,
            "flags": list(self.flags),
        }


def _errors(pred, gt_positions, image_size) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt_positions = np.asarray(gt_positions, dtype=np.float64)
    if pred.shape != gt_positions.shape:
        raise ValueError(f"prediction shape {pred.shape} vs ground truth {gt_positions.shape}")
    if image_size is None:
        scale = np.ones(2)
    else:
        h, w = image_size
        scale = np.array([EVAL_SIZE / w, EVAL_SIZE / h])
    return np.linalg.norm((pred - gt_positions) * scale, axis=-1)


def predicted_visible(occl_logits) -> np.ndarray:
    """A frame is predicted visible iff its visibility probability is strictly above 0.5."""
    return (1.0 - sigmoid(occl_logits)) > 0.5


def pck(pred, gt: GroundTruthTrack, image_size=None):
    """Fraction of visible frames within each threshold.

    Returns:
        ``(pck_avg, per_threshold)``, or ``(None, None)`` when the track has
        no visible frame.
    """
    err = _errors(pred, gt.positions, image_size)[gt.visible]
    if err.size == 0:
        return None, None
    per = [float(np.mean(err < d)) for d in THRESHOLDS]
    return float(np.mean(per)), per


def occlusion_accuracy(pred_occl, gt: GroundTruthTrack) -> float:
    pred_occl = np.asarray(pred_occl)
    if pred_occl.shape != gt.visible.shape:
        raise ValueError(f"occlusion shape {pred_occl.shape} vs {gt.visible.shape}")
    return float(np.mean(predicted_visible(pred_occl) == gt.visible))


def jaccard_per_threshold(pred, pred_occl, gt: GroundTruthTrack, image_size=None, convention: str = "frame"):
    """Per-threshold Jaccard and a flag telling whether any threshold was vacuous.

    ``convention="frame"`` counts each frame once: a visible prediction that
    misses its threshold is a false positive only, and false negatives are
    visible frames predicted occluded. ``convention="tapvid"`` also counts
    the missed visible frame as a false negative (denominator is all
    visible ground truth plus false positives), matching the TAP-Vid
    reference code.
    """
    err = _errors(pred, gt.positions, image_size)
    pv = predicted_visible(pred_occl)
    gv = gt.visible
    out, vacuous = [], False
    for d in THRESHOLDS:
        close = err < d
        tp = np.sum(pv & gv & close)
        fp = np.sum(pv & (~gv | ~close))
        if convention == "frame":
            fn = np.sum(gv & ~pv)
        elif convention == "tapvid":
            fn = np.sum(gv) - tp
        else:
            raise ValueError(f"unknown Jaccard convention {convention!r}")
        denom = tp + fp + fn
        if denom == 0:
            out.append(1.0)
            vacuous = True
        else:
            out.append(float(tp / denom))
    return out, vacuous


def average_jaccard(pred, pred_occl, gt: GroundTruthTrack, image_size=None, convention: str = "frame") -> float:
    per, _ = jaccard_per_threshold(pred, pred_occl, gt, image_size, convention)
    return float(np.mean(per))


def sample_queries(gt: GroundTruthTrack, mode: str = "strided") -> list[QueryPoint]:
    """Query points on a ground-truth track.

    ``strided``: every frame index divisible by 5 where the point is visible.
    ``first``: the first visible frame only.
    """
    vis = np.flatnonzero(gt.visible)
    if mode == "strided":
        frames = [int(t) for t in vis if t % QUERY_STRIDE == 0]
    elif mode == "first":
        frames = [int(vis[0])] if vis.size else []
    else:
        raise ValueError(f"unknown query mode {mode!r}")
    return [QueryPoint(float(gt.positions[t, 0]), float(gt.positions[t, 1]), t) for t in frames]


def evaluate(pairs, image_size=None, convention: str = "frame") -> MetricsReport:
    """Average metrics over ``(pred_track, pred_occl, gt)`` triples."""
    ajs, pcks, oas, flags = [], [], [], []
    for i, (pred, occl, gt) in enumerate(pairs):
        avg, per = pck(pred, gt, image_size)
        if avg is None:
            flags.append(f"track {i}: no visible frames, excluded")
            continue
        per_j, vacuous = jaccard_per_threshold(pred, occl, gt, image_size, convention)
        if vacuous:
            flags.append(f"track {i}: empty Jaccard denominator counted as 1.0")
        ajs.append(np.mean(per_j))
        pcks.append(per)
        oas.append(occlusion_accuracy(occl, gt))
    if not ajs:
        return MetricsReport(0.0, 0.0, [0.0] * len(THRESHOLDS), 0.0, 0, flags)
    per = np.mean(np.array(pcks), axis=0)
    return MetricsReport(
        aj=float(np.mean(ajs)),
        pck_avg=float(np.mean(per)),
        pck_per_threshold=[float(v) for v in per],
        oa=float(np.mean(oas)),
        n_points=len(ajs),
        flags=flags,
    )
