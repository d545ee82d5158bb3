"""Two-branch convolutional encoder for local 4D correlation volumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import LocalCorr4D, transpose_corr
from .numerics import conv2d, group_norm, relu
from .weights import WeightsContainer

BRANCHES = ("direct", "transposed")


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple[int, ...]
    kernels: tuple[int, ...]
    strides: tuple[int, ...]

    @property
    def out_dim(self) -> int:
        return self.channels[-1]


ENCODER_CONFIGS = {
    "S": EncoderConfig(channels=(64, 128), kernels=(5, 2), strides=(4, 2)),
    "B": EncoderConfig(channels=(64, 128, 128), kernels=(3, 3, 2), strides=(2, 2, 2)),
}
GN_GROUPS = 16


def embedding_dim(variant: str, num_levels: int = 3) -> int:
    return num_levels * len(BRANCHES) * ENCODER_CONFIGS[variant].out_dim


def encoder_manifest(variant: str, num_levels: int = 3, window: int = 7) -> dict[str, tuple[int, ...]]:
    cfg = ENCODER_CONFIGS[variant]
    shapes = {}
    for level in range(num_levels):
        for branch in BRANCHES:
            cin = window * window
            for i, (cout, k) in enumerate(zip(cfg.channels, cfg.kernels)):
                pre = f"encoder.l{level}.{branch}.block{i}"
                shapes[f"{pre}.conv.weight"] = (k, k, cin, cout)
                shapes[f"{pre}.conv.bias"] = (cout,)
                shapes[f"{pre}.gn.gamma"] = (cout,)
                shapes[f"{pre}.gn.beta"] = (cout,)
                cin = cout
    return shapes


def _branch_input(vol: np.ndarray) -> np.ndarray:
    # [..., hp, wp, hq, wq] -> [..., hq, wq, hp*wp]: query grid is spatial,
    # flattened target grid is channels.
    *lead, hp, wp, hq, wq = vol.shape
    x = vol.reshape(*lead, hp * wp, hq, wq)
    return np.moveaxis(x, -3, -1)


def encode_branch(
    vol,
    weights: WeightsContainer,
    variant: str = "B",
    prefix: str = "encoder.l0.direct",
    trace: list | None = None,
) -> np.ndarray:
    """Encode one volume (or a ``[T, 7, 7, 7, 7]`` batch) to a ``C_last`` vector.

    If ``trace`` is a list, the spatial side length after each block is
    appended to it (input size first).
    """
    if isinstance(vol, LocalCorr4D):
        vol = vol.vol
    vol = np.asarray(vol, dtype=np.float32)
    if vol.shape[-4:] != (7, 7, 7, 7):
        raise ValueError(f"encoder expects a 7x7x7x7 volume, got {vol.shape}")
    cfg = ENCODER_CONFIGS[variant]
    x = _branch_input(vol)
    if trace is not None:
        trace.append(x.shape[-2])
    for i, (cout, s) in enumerate(zip(cfg.channels, cfg.strides)):
        pre = f"{prefix}.block{i}"
        x = conv2d(x, weights[f"{pre}.conv.weight"], stride=s, padding="same", bias=weights[f"{pre}.conv.bias"])
        x = group_norm(x, min(GN_GROUPS, cout), weights[f"{pre}.gn.gamma"], weights[f"{pre}.gn.beta"])
        x = relu(x)
        if trace is not None:
            trace.append(x.shape[-2])
    return x.mean(axis=(-3, -2))


def encode_corr(
    vols,
    weights: WeightsContainer,
    variant: str = "B",
    shared: bool = False,
    num_levels: int = 3,
) -> np.ndarray:
    """Concatenate ``[direct; transposed]`` branch embeddings over all levels.

    ``vols`` holds one entry per level: a :class:`LocalCorr4D` or an array
    ``[7, 7, 7, 7]`` / ``[T, 7, 7, 7, 7]``. With ``shared=True`` both
    branches use the ``direct`` weights.
    """
    if len(vols) != num_levels:
        raise ValueError(f"expected {num_levels} correlation levels, got {len(vols)}")
    parts = []
    for level, v in enumerate(vols):
        if isinstance(v, LocalCorr4D):
            direct, transposed = v.vol, transpose_corr(v).vol
        else:
            v = np.asarray(v, dtype=np.float32)
            direct = v
            transposed = np.swapaxes(np.swapaxes(v, -4, -2), -3, -1)
        for branch, x in zip(BRANCHES, (direct, transposed)):
            owner = "direct" if shared else branch
            parts.append(encode_branch(x, weights, variant, prefix=f"encoder.l{level}.{owner}"))
    return np.concatenate(parts, axis=-1)
