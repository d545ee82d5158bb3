"""Stage II: iterative track refinement.

A small pre-norm Transformer runs over the frame axis. Attention heads are
split into a left-looking and a right-looking group, each with a linear
distance penalty, so the model has no notion of absolute frame index and
runs on any sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backbone import FeaturePyramid
from .corr_encoder import embedding_dim, encode_corr
from .correlation import QueryPoint, track_local_volumes
from .numerics import ENCODING_WIDTH, gelu, layer_norm, linear, sinusoidal_encode, softmax
from .track_init import SIGMA_G, TAU, kernel_softargmax
from .weights import WeightsContainer

RADIUS = 3


@dataclass(frozen=True)
class RefinerConfig:
    variant: str = "B"
    hidden: int = 384
    heads: int = 6
    n_layers: int = 3
    mlp_ratio: float = 4.0
    iterations: int = 4
    num_levels: int = 3

    def __post_init__(self):
        if self.heads % 2:
            raise ValueError(f"heads must be even, got {self.heads}")
        if self.hidden % self.heads:
            raise ValueError(f"hidden {self.hidden} not divisible by {self.heads} heads")

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "RefinerConfig":
        sizes = {"S": (256, 4), "B": (384, 6)}
        if variant not in sizes:
            raise ValueError(f"unknown variant {variant!r}")
        hidden, heads = sizes[variant]
        return cls(variant=variant, hidden=hidden, heads=heads, **overrides)

    @property
    def mlp_hidden(self) -> int:
        return int(self.hidden * self.mlp_ratio)

    @property
    def embedding_dim(self) -> int:
        return embedding_dim(self.variant, self.num_levels)

    @property
    def token_dim(self) -> int:
        # two adjacent-frame deltas x two coordinates, occlusion logit, correlation embedding
        return 2 * 2 * ENCODING_WIDTH + 1 + self.embedding_dim


def default_slopes(heads: int) -> np.ndarray:
    """Geometric per-head slopes ``2^(-8(j+1)/n)``, repeated for each direction group."""
    n = heads // 2
    group = 2.0 ** (-8.0 * (np.arange(n) + 1) / n)
    return np.concatenate([group, group]).astype(np.float32)


def build_bias(T: int, cfg: RefinerConfig, slopes: np.ndarray | None = None) -> np.ndarray:
    """Additive attention bias ``[heads, T, T]``.

    Heads in the first half see only keys at or before the query frame,
    the second half only keys at or after it; allowed keys get
    ``-slope * |t1 - t2|``.
    """
    # float64 until the final cast so each entry is the correctly rounded closed form
    n = cfg.heads // 2
    if slopes is None:
        slopes = np.tile(2.0 ** (-8.0 * (np.arange(n) + 1) / n), 2)
    slopes = np.asarray(slopes, np.float64)
    if slopes.shape != (cfg.heads,) or np.any(slopes < 0):
        raise ValueError(f"need {cfg.heads} non-negative slopes, got {slopes}")
    t1 = np.arange(T)[:, None]
    t2 = np.arange(T)[None, :]
    dist = np.abs(t1 - t2).astype(np.float64)
    bias = -slopes[:, None, None] * dist
    left = np.broadcast_to(t1 < t2, bias.shape).copy()
    left[n:] = False
    right = np.broadcast_to(t1 > t2, bias.shape).copy()
    right[:n] = False
    bias[left | right] = -np.inf
    return bias.astype(np.float32)


def refiner_manifest(cfg: RefinerConfig) -> dict[str, tuple[int, ...]]:
    h, m = cfg.hidden, cfg.mlp_hidden
    shapes = {"refiner.input.weight": (cfg.token_dim, h), "refiner.input.bias": (h,)}
    for i in range(cfg.n_layers):
        pre = f"refiner.block{i}"
        shapes[f"{pre}.ln1.gamma"] = (h,)
        shapes[f"{pre}.ln1.beta"] = (h,)
        for p in ("q", "k", "v", "o"):
            shapes[f"{pre}.attn.w{p}"] = (h, h)
            shapes[f"{pre}.attn.b{p}"] = (h,)
        shapes[f"{pre}.ln2.gamma"] = (h,)
        shapes[f"{pre}.ln2.beta"] = (h,)
        shapes[f"{pre}.mlp.fc1.weight"] = (h, m)
        shapes[f"{pre}.mlp.fc1.bias"] = (m,)
        shapes[f"{pre}.mlp.fc2.weight"] = (m, h)
        shapes[f"{pre}.mlp.fc2.bias"] = (h,)
    shapes["refiner.final_ln.gamma"] = (h,)
    shapes["refiner.final_ln.beta"] = (h,)
    shapes["refiner.head.weight"] = (h, 3)
    shapes["refiner.head.bias"] = (3,)
    return shapes


def attention(
    x: np.ndarray,
    weights: WeightsContainer,
    bias: np.ndarray,
    prefix: str = "refiner.block0.attn",
    return_weights: bool = False,
):
    """Multi-head self-attention over ``x[T, hidden]`` with additive ``bias[heads, T, T]``."""
    x = np.asarray(x, dtype=np.float32)
    heads = bias.shape[0]
    t, hidden = x.shape
    if hidden % heads:
        raise ValueError(f"hidden {hidden} not divisible by {heads} heads")
    if bias.shape[1:] != (t, t):
        raise ValueError(f"bias shape {bias.shape} does not match sequence length {t}")
    d = hidden // heads

    def proj(p):
        y = linear(x, weights[f"{prefix}.w{p}"], weights[f"{prefix}.b{p}"])
        return y.reshape(t, heads, d).transpose(1, 0, 2)

    q, k, v = proj("q"), proj("k"), proj("v")
    logits = q @ k.transpose(0, 2, 1) / np.float32(np.sqrt(d)) + bias
    attn = softmax(logits, axis=-1)
    y = (attn @ v).transpose(1, 0, 2).reshape(t, hidden)
    out = linear(y, weights[f"{prefix}.wo"], weights[f"{prefix}.bo"])
    return (out, attn) if return_weights else out


def transformer_block(x, weights, bias, prefix):
    h = layer_norm(x, weights[f"{prefix}.ln1.gamma"], weights[f"{prefix}.ln1.beta"])
    x = x + attention(h, weights, bias, prefix=f"{prefix}.attn")
    h = layer_norm(x, weights[f"{prefix}.ln2.gamma"], weights[f"{prefix}.ln2.beta"])
    h = gelu(linear(h, weights[f"{prefix}.mlp.fc1.weight"], weights[f"{prefix}.mlp.fc1.bias"]))
    return x + linear(h, weights[f"{prefix}.mlp.fc2.weight"], weights[f"{prefix}.mlp.fc2.bias"])


def build_tokens(track: np.ndarray, occl: np.ndarray, emb: np.ndarray) -> np.ndarray:
    """Per-frame ``[enc(T_t - T_{t-1}); enc(T_{t+1} - T_t); O_t; E_t]``.

    The track is padded by repeating its first and last positions, so both
    boundary deltas are exactly zero.
    """
    track = np.asarray(track, dtype=np.float32)
    occl = np.asarray(occl, dtype=np.float32)
    emb = np.asarray(emb, dtype=np.float32)
    if not (len(track) == len(occl) == len(emb)):
        raise ValueError(f"length mismatch: track {len(track)}, occlusion {len(occl)}, embedding {len(emb)}")
    padded = np.concatenate([track[:1], track, track[-1:]])
    back = padded[1:-1] - padded[:-2]
    fwd = padded[2:] - padded[1:-1]
    t = len(track)
    enc_back = sinusoidal_encode(back).reshape(t, -1)
    enc_fwd = sinusoidal_encode(fwd).reshape(t, -1)
    return np.concatenate([enc_back, enc_fwd, occl[:, None], emb], axis=-1)


def refine_step(track, occl, emb, weights: WeightsContainer, cfg: RefinerConfig, slopes=None):
    """One Transformer pass; returns ``(delta_track [T, 2], delta_occl [T])``."""
    tokens = build_tokens(track, occl, emb)
    x = linear(tokens, weights["refiner.input.weight"], weights["refiner.input.bias"])
    bias = build_bias(len(tokens), cfg, slopes)
    for i in range(cfg.n_layers):
        x = transformer_block(x, weights, bias, f"refiner.block{i}")
    x = layer_norm(x, weights["refiner.final_ln.gamma"], weights["refiner.final_ln.beta"])
    out = linear(x, weights["refiner.head.weight"], weights["refiner.head.bias"])
    return out[:, :2], out[:, 2]


def argmax_refine_step(
    track: np.ndarray,
    pyramid: FeaturePyramid,
    query: QueryPoint,
    tau: float = TAU,
    sigma_g: float = SIGMA_G,
) -> np.ndarray:
    """Non-learned update: peak of the level-0 local correlation, query-averaged.

    The query side is averaged over its central 3x3 offsets, leaving a 7x7
    map over target offsets whose windowed soft-argmax gives the shift.
    Near-ties go to the cell nearest the current estimate, so a flat map
    yields no update.
    """
    vols = track_local_volumes(
        FeaturePyramid(pyramid.levels[:1], pyramid.strides[:1]), track, query, RADIUS
    )[0]
    c = RADIUS
    target_maps = vols[:, :, :, c - 1:c + 2, c - 1:c + 2].mean(axis=(-2, -1))
    delta = np.array([kernel_softargmax(m, tau, sigma_g, tie_break="center") for m in target_maps], dtype=np.float32)
    return (delta - c) * pyramid.strides[0]


def iterate(
    track0: np.ndarray,
    occl0: np.ndarray,
    pyramid: FeaturePyramid,
    query: QueryPoint,
    weights: WeightsContainer | None,
    cfg: RefinerConfig,
    refiner: str = "learned",
    tau: float = TAU,
    sigma_g: float = SIGMA_G,
    slopes=None,
):
    """Apply ``cfg.iterations`` residual updates.

    Returns:
        ``(track, occl, history)`` where ``history`` lists the track before
        every update plus the final one (``iterations + 1`` entries).
    """
    track = np.asarray(track0, dtype=np.float32).copy()
    occl = np.asarray(occl0, dtype=np.float32).copy()
    history = [track.copy()]
    for _ in range(cfg.iterations):
        if refiner == "learned":
            vols = track_local_volumes(pyramid, track, query, RADIUS)
            emb = encode_corr(vols, weights, cfg.variant, num_levels=cfg.num_levels)
            d_track, d_occl = refine_step(track, occl, emb, weights, cfg, slopes)
            occl = occl + d_occl
        elif refiner == "argmax":
            d_track = argmax_refine_step(track, pyramid, query, tau, sigma_g)
        else:
            raise ValueError(f"unknown refiner {refiner!r}")
        track = track + d_track
        history.append(track.copy())
    return track, occl, history
