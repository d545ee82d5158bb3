"""Video, query, ground-truth and track file formats.

Videos are either a directory of numbered PNG frames or an LTW1 file
holding one ``video`` tensor ``[T, H, W, 3]``. Everything else is UTF-8
JSON carrying a ``schema`` tag.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

from .backbone import Video
from .correlation import QueryPoint
from .metrics import GroundTruthTrack
from .weights import WeightsContainer, WeightsError, load_weights, save_weights

TRACKS_SCHEMA = "pointtrack.tracks/1"
QUERIES_SCHEMA = "pointtrack.queries/1"
GT_SCHEMA = "pointtrack.gt/1"
VIDEO_TENSOR = "video"
PNG_LEVELS = 255.0


class FormatError(ValueError):
    """A file parsed but violates its schema."""

    code = 20


def _frame_index(path: Path) -> int:
    digits = re.findall(r"\d+", path.stem)
    if not digits:
        raise FormatError(f"frame file {path.name} has no frame number")
    return int(digits[-1])


def load_video(path: str | os.PathLike) -> Video:
    """Read a PNG frame directory (sorted by the last number in each name) or an LTW1 tensor file."""
    from PIL import Image

    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.png"), key=_frame_index)
        if not files:
            raise FormatError(f"no PNG frames in {path}")
        frames = []
        for f in files:
            with Image.open(f) as im:
                frames.append(np.asarray(im.convert("RGB"), dtype=np.float32) / PNG_LEVELS)
        return Video(np.stack(frames))
    try:
        container = load_weights(path)
    except WeightsError as e:
        raise type(e)(f"{path}: {e}") from None
    if VIDEO_TENSOR not in container:
        raise FormatError(f"{path}: LTW1 file has no {VIDEO_TENSOR!r} tensor")
    return Video(np.array(container[VIDEO_TENSOR]))


def save_video(video: Video, path: str | os.PathLike) -> None:
    """Write ``video`` as an LTW1 tensor file, or as PNG frames if ``path`` is a directory name without suffix.

    The tensor form is bit exact; PNG quantizes to 8 bits.
    """
    from PIL import Image

    path = Path(path)
    if path.suffix:
        save_weights(WeightsContainer({VIDEO_TENSOR: video.frames}), path)
        return
    path.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(video.num_frames)))
    for t, frame in enumerate(video.frames):
        pixels = np.clip(np.rint(frame * PNG_LEVELS), 0, 255).astype(np.uint8)
        Image.fromarray(pixels).save(path / f"frame_{t:0{width}d}.png")


def _read_json(path, schema: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict) or doc.get("schema") != schema:
        found = doc.get("schema") if isinstance(doc, dict) else None
        raise FormatError(f"{path}: expected schema {schema!r}, found {found!r}")
    return doc


def _write_json(doc: dict, path) -> None:
    # Python floats print with shortest round-trip repr, so float32 values survive exactly
    text = json.dumps(doc, indent=1, sort_keys=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def save_queries(queries, path, track_ids=None) -> None:
    ids = list(range(len(queries))) if track_ids is None else list(track_ids)
    doc = {
        "schema": QUERIES_SCHEMA,
        "queries": [{"track_id": i, "x": float(q.x), "y": float(q.y), "t": int(q.t)} for i, q in zip(ids, queries)],
    }
    _write_json(doc, path)


def load_queries(path) -> tuple[list[int], list[QueryPoint]]:
    doc = _read_json(path, QUERIES_SCHEMA)
    ids, queries = [], []
    try:
        for k, entry in enumerate(doc["queries"]):
            ids.append(int(entry.get("track_id", k)))
            queries.append(QueryPoint(float(entry["x"]), float(entry["y"]), int(entry["t"])))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed query entry: {e!r}") from None
    return ids, queries


def save_ground_truth(tracks: list[GroundTruthTrack], image_size, path) -> None:
    doc = {
        "schema": GT_SCHEMA,
        "image_size": [int(image_size[0]), int(image_size[1])],
        "tracks": [
            {
                "track_id": i,
                "positions": [[float(x), float(y)] for x, y in gt.positions],
                "visible": [bool(v) for v in gt.visible],
            }
            for i, gt in enumerate(tracks)
        ],
    }
    _write_json(doc, path)


def load_ground_truth(path) -> tuple[tuple[int, int], dict[int, GroundTruthTrack]]:
    doc = _read_json(path, GT_SCHEMA)
    try:
        h, w = (int(v) for v in doc["image_size"])
        tracks = {}
        for k, entry in enumerate(doc["tracks"]):
            tid = int(entry.get("track_id", k))
            if tid in tracks:
                raise FormatError(f"{path}: duplicate track_id {tid}")
            tracks[tid] = GroundTruthTrack(np.array(entry["positions"], np.float32), np.array(entry["visible"], bool))
    except (KeyError, TypeError) as e:
        raise FormatError(f"{path}: malformed ground truth: {e!r}") from None
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None
    return (h, w), tracks


def save_tracks(doc: dict, path) -> None:
    """Write a track document built by :func:`tracks_document`."""
    _write_json(doc, path)


def tracks_document(results, image_size, meta: dict) -> dict:
    """Assemble the JSON track document.

    Args:
        results: iterable of ``(track_id, query, track [T, 2], occl_prob [T], history)``;
            ``history`` may be None.
        image_size: ``(H, W)`` of the video.
        meta: run settings copied verbatim into the document.
    """
    out = []
    for tid, q, track, prob, history in results:
        entry = {
            "track_id": int(tid),
            "query": {"x": float(q.x), "y": float(q.y), "t": int(q.t)},
            "points": [[float(x), float(y), float(p)] for (x, y), p in zip(track, prob)],
        }
        if history is not None:
            entry["history"] = [[[float(x), float(y)] for x, y in h] for h in history]
        out.append(entry)
    return {"schema": TRACKS_SCHEMA, "image_size": [int(image_size[0]), int(image_size[1])], **meta, "tracks": out}


def load_tracks(path) -> dict:
    """Parse a track file; per-track ``points`` become ``track [T, 2]`` and ``occl_prob [T]`` arrays."""
    doc = _read_json(path, TRACKS_SCHEMA)
    try:
        for entry in doc["tracks"]:
            pts = np.array(entry["points"], np.float32).reshape(-1, 3)
            entry["track"] = pts[:, :2]
            entry["occl_prob"] = pts[:, 2]
            q = entry["query"]
            entry["query"] = QueryPoint(float(q["x"]), float(q["y"]), int(q["t"]))
            if "history" in entry:
                hist = np.array(entry["history"], np.float32)
                if hist.ndim != 3 or hist.shape[1:] != pts[:, :2].shape:
                    raise FormatError(f"{path}: history shape {hist.shape} inconsistent with {len(pts)} frames")
                entry["history"] = hist
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"{path}: malformed track entry: {e!r}") from None
    lengths = {len(e["track"]) for e in doc["tracks"]}
    if len(lengths) > 1:
        raise FormatError(f"{path}: tracks have differing lengths {sorted(lengths)}")
    return doc
