"""Static figures for eval and bench reports, and per-frame track overlays."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import THRESHOLDS  # noqa: E402


def plot_eval(report: dict, path) -> None:
    """Bar chart of PCK per threshold, AJ and OA in the title."""
    per = report["pck_per_threshold"]
    values = [per[str(d)] for d in THRESHOLDS]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([str(d) for d in THRESHOLDS], values, color="tab:blue")
    ax.set_ylim(0, 1)
    ax.set_xlabel("threshold (px at 256x256)")
    ax.set_ylabel("fraction within threshold")
    ax.set_title(f"AJ {report['aj']:.3f}   PCK {report['pck_avg']:.3f}   OA {report['oa']:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_bench(report: dict, path) -> None:
    """Throughput against point count on log-log axes."""
    n = [t["n_points"] for t in report["timings"]]
    tp = [t["points_per_sec"] for t in report["timings"]]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.loglog(n, tp, "o-")
    ax.set_xlabel("points per video")
    ax.set_ylabel("points / second")
    ax.set_title(f"variant {report['variant']}, T={report['frames']}, K={report['iterations']}")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def render_overlays(video, doc: dict, out_dir) -> list[Path]:
    """One PNG per frame with every track drawn; hollow markers mark predicted occlusion."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tracks = doc["tracks"]
    colors = plt.cm.tab20(np.linspace(0, 1, max(len(tracks), 1)))
    h, w = video.size
    paths = []
    for t, frame in enumerate(video.frames):
        fig = plt.figure(figsize=(w / 100, h / 100), dpi=100)
        ax = fig.add_axes([0, 0, 1, 1])
        ax.imshow(np.clip(frame, 0, 1), interpolation="nearest")
        for color, entry in zip(colors, tracks):
            x, y, p = entry["points"][t]
            occluded = (1.0 - p) <= 0.5
            ax.plot([x], [y], "o", ms=5, mec=color, mfc="none" if occluded else color)
        ax.set_xlim(-0.5, w - 0.5)
        ax.set_ylim(h - 0.5, -0.5)
        ax.axis("off")
        path = out_dir / f"overlay_{t:05d}.png"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths
