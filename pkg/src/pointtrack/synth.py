"""Seeded synthetic videos with exact ground-truth tracks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backbone import Video
from .metrics import GroundTruthTrack

MOTIONS = ("translate", "sine", "occluder")
MARGIN = 16
SPRITE = 48
BAR_WIDTH = 16
BAR_COLOR = 0.5


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    T: int = 24
    H: int = 256
    W: int = 256
    motion: str = "translate"
    speed: float = 2.0
    n_queries: int = 16

    def __post_init__(self):
        if self.H % 8 or self.W % 8:
            raise ValueError(f"frame size {self.H}x{self.W} must be divisible by 8")
        if self.motion not in MOTIONS:
            raise ValueError(f"unknown motion {self.motion!r}, expected one of {MOTIONS}")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if self.T < 1 or self.n_queries < 1:
            raise ValueError("T and n_queries must be positive")
        if self.motion in ("translate", "occluder") and self.speed * self.T >= self.W - 2 * MARGIN:
            raise ValueError(f"speed {self.speed} px/frame leaves the frame within {self.T} frames")


TEXTURE_SLOPE = 1.5
TEXTURE_ROLLOFF = 16.0
TEXTURE_BASE = 0.5
TEXTURE_CONTRAST = 0.2
TEXTURE_FLOOR = 0.02


def texture(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Seeded RGB noise with a natural-image-like power-law spectrum.

    Each channel is white noise filtered to amplitude ``f^-1.5`` with a
    Gaussian roll-off at wavelengths below ~16 px, scaled to unit standard
    deviation, then mapped to ``0.5 + 0.2 z`` and clipped to ``[0.02, 1]``.
    The floor keeps every patch feature away from the zero vector.
    """
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    amp = f**-TEXTURE_SLOPE * np.exp(-((f * TEXTURE_ROLLOFF) ** 2))
    amp[0, 0] = 0.0
    chans = [np.fft.ifft2(np.fft.fft2(rng.standard_normal((h, w))) * amp).real for _ in range(3)]
    z = np.stack(chans, axis=-1)
    z /= z.std()
    return np.clip(TEXTURE_BASE + TEXTURE_CONTRAST * z, TEXTURE_FLOOR, 1.0).astype(np.float32)


def _shift_x(canvas: np.ndarray, offset: float, width: int) -> np.ndarray:
    """Columns ``canvas[:, x + offset]`` for ``x < width``, linear in the fractional part."""
    i = math.floor(offset)
    f = np.float32(offset - i)
    a = canvas[:, i:i + width]
    if f == 0:
        return a.copy()
    b = canvas[:, i + 1:i + 1 + width]
    return (a * (1 - f) + b * f).astype(np.float32)


def synth_generate(spec: SynthSpec) -> tuple[Video, list[GroundTruthTrack]]:
    rng = np.random.default_rng(spec.seed)
    T, H, W = spec.T, spec.H, spec.W
    if spec.motion == "sine":
        return _sine(spec, rng)

    travel = spec.speed * (T - 1)
    pad = int(math.ceil(abs(travel))) + 2
    canvas = texture(rng, H, W + pad)
    # content moves right by `speed` px per frame
    frames = np.stack([_shift_x(canvas, pad - spec.speed * t, W) for t in range(T)])
    x_hi = W - MARGIN - max(travel, 0.0)
    # even pixels sit on the stride-2 feature lattice
    xs = 2 * rng.integers(MARGIN // 2, int(x_hi) // 2, size=spec.n_queries)
    ys = 2 * rng.integers(MARGIN // 2, (H - MARGIN) // 2, size=spec.n_queries)
    ts = np.arange(T, dtype=np.float32)
    tracks_xy = [
        np.stack([x + spec.speed * ts, np.full(T, y, np.float32)], axis=-1) for x, y in zip(xs, ys)
    ]
    visible = [np.ones(T, bool) for _ in tracks_xy]

    if spec.motion == "occluder":
        bar_speed = (W + BAR_WIDTH) / max(T - 1, 1)
        for t in range(T):
            left = int(round(-BAR_WIDTH + bar_speed * t))
            lo, hi = max(left, 0), min(left + BAR_WIDTH, W)
            if lo < hi:
                frames[t, :, lo:hi] = BAR_COLOR
            for pos, vis in zip(tracks_xy, visible):
                if lo <= pos[t, 0] < hi:
                    vis[t] = False
    gts = [GroundTruthTrack(p, v) for p, v in zip(tracks_xy, visible)]
    return Video(frames), gts


def _sine(spec: SynthSpec, rng: np.random.Generator) -> tuple[Video, list[GroundTruthTrack]]:
    T, H, W = spec.T, spec.H, spec.W
    background = texture(rng, H, W)
    sprite = texture(rng, SPRITE, SPRITE)
    amp_x = min(spec.speed * 4.0, (W - SPRITE) / 2 - 1)
    amp_y = min(spec.speed * 2.0, (H - SPRITE) / 2 - 1)
    cx, cy = (W - SPRITE) / 2, (H - SPRITE) / 2
    period = max(T, 2)
    corners = []
    frames = np.empty((T, H, W, 3), np.float32)
    for t in range(T):
        ph = 2 * math.pi * t / period
        x0 = int(round(cx + amp_x * math.sin(ph)))
        y0 = int(round(cy + amp_y * math.sin(2 * ph)))
        corners.append((x0, y0))
        frames[t] = background
        frames[t, y0:y0 + SPRITE, x0:x0 + SPRITE] = sprite
    corners = np.array(corners, np.float32)
    offs = rng.integers(4, SPRITE - 4, size=(spec.n_queries, 2)).astype(np.float32)
    gts = [GroundTruthTrack(corners + o, np.ones(T, bool)) for o in offs]
    return Video(frames), gts
