"""Model manifests and seeded parameter initialization."""

from __future__ import annotations

import numpy as np

from .backbone import backbone_manifest
from .corr_encoder import encoder_manifest
from .refiner import RefinerConfig, refiner_manifest
from .track_init import init_head_manifest
from .weights import WeightsContainer

VARIANTS = ("S", "B")


def manifest(variant: str, num_levels: int = 3) -> dict[str, tuple[int, ...]]:
    """Every parameter name and shape for a model variant, in a fixed order."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    shapes = {}
    shapes.update(backbone_manifest())
    shapes.update(init_head_manifest(num_levels))
    shapes.update(encoder_manifest(variant, num_levels))
    shapes.update(refiner_manifest(RefinerConfig.for_variant(variant)))
    return shapes


def _fan_in(shape: tuple[int, ...]) -> int:
    return int(np.prod(shape[:-1]))


def init_weights(variant: str = "B", seed: int = 0) -> WeightsContainer:
    """Fan-in scaled uniform init from a seeded generator.

    Conventions by tensor name:
      * ``*.bias`` / ``*.beta`` / ``b*`` attention biases -> 0
      * ``*.gamma`` -> 1
      * ``refiner.head.*`` -> 0, so an untrained refiner leaves tracks unchanged
      * ``init.fuse.weight`` -> passes the level-0 correlation through its
        centre tap, so Stage I works without training
    """
    rng = np.random.default_rng(np.uint64(seed))
    out = {}
    for name, shape in manifest(variant).items():
        leaf = name.rsplit(".", 1)[-1]
        if name.startswith("refiner.head."):
            value = np.zeros(shape, np.float32)
        elif name == "init.fuse.weight":
            value = np.zeros(shape, np.float32)
            value[1, 1, 0, 0] = 1.0
        elif leaf == "gamma":
            value = np.ones(shape, np.float32)
        elif leaf in ("bias", "beta") or (leaf.startswith("b") and ".attn." in name):
            value = np.zeros(shape, np.float32)
        else:
            bound = 1.0 / np.sqrt(_fan_in(shape))
            value = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        out[name] = value
    return WeightsContainer(out)
