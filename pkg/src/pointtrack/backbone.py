"""Per-frame feature pyramids at strides 2, 4 and 8."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import conv2d, instance_norm, l2_normalize, relu
from .weights import WeightsContainer

STRIDES = (2, 4, 8)
WIDTHS = (64, 128, 256)
KERNEL = 3


@dataclass(frozen=True)
class Video:
    """``frames`` is ``[T, H, W, 3]`` float32 in ``[0, 1]``."""

    frames: np.ndarray
    frame_rate: float | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"video frames must be [T, H, W, 3], got {frames.shape}")
        t, h, w, _ = frames.shape
        if t < 1:
            raise ValueError("video has no frames")
        if h % 8 or w % 8:
            raise ValueError(f"frame size {h}x{w} must be divisible by 8")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


@dataclass(frozen=True, eq=False)
class FeaturePyramid:
    levels: list[np.ndarray]
    strides: tuple[int, ...] = field(default=STRIDES)
    _unit: list = field(default=None, init=False, repr=False)

    def unit_levels(self) -> list[np.ndarray]:
        """Levels with every feature vector scaled to unit length (computed once)."""
        if self._unit is None:
            object.__setattr__(self, "_unit", [l2_normalize(f) for f in self.levels])
        return self._unit

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def num_frames(self) -> int:
        return self.levels[0].shape[0]


def backbone_manifest() -> dict[str, tuple[int, ...]]:
    shapes = {}
    cin = 3
    for i, cout in enumerate(WIDTHS):
        shapes[f"backbone.block{i}.weight"] = (KERNEL, KERNEL, cin, cout)
        shapes[f"backbone.block{i}.bias"] = (cout,)
        cin = cout
    return shapes


def extract_pyramid(video: Video, weights: WeightsContainer) -> FeaturePyramid:
    """Run the three-block conv net (conv, instance norm, ReLU) on every frame.

    Each block halves the resolution, so block ``i`` emits the level at
    stride ``2 ** (i + 1)``.
    """
    params = [
        (weights[f"backbone.block{i}.weight"], weights[f"backbone.block{i}.bias"])
        for i in range(len(WIDTHS))
    ]
    per_level: list[list[np.ndarray]] = [[] for _ in params]
    for frame in video.frames:
        x = frame
        for i, (k, b) in enumerate(params):
            x = relu(instance_norm(conv2d(x, k, stride=2, padding="same", bias=b)))
            per_level[i].append(x)
    return FeaturePyramid([np.stack(level) for level in per_level], STRIDES)


def patch_identity_pyramid(video: Video) -> FeaturePyramid:
    """Parameter-free pyramid whose features are raw RGB patches.

    At stride ``s`` the feature of cell ``(i, j)`` is the ``s x s`` patch of
    pixels starting at ``(s*i - s//2, s*j - s//2)`` flattened to ``3 * s**2``
    channels; pixels outside the frame replicate the border.
    """
    frames = video.frames
    t, h, w, _ = frames.shape
    levels = []
    for s in STRIDES:
        half = s // 2
        padded = np.pad(frames, ((0, 0), (half, 0), (half, 0), (0, 0)), mode="edge")[:, :h, :w]
        blocks = padded.reshape(t, h // s, s, w // s, s, 3).transpose(0, 1, 3, 2, 4, 5)
        levels.append(np.ascontiguousarray(blocks.reshape(t, h // s, w // s, 3 * s * s)))
    return FeaturePyramid(levels, STRIDES)
