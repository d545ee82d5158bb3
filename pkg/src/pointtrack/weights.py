"""Named-tensor container and the LTW1 binary format.

Layout (little-endian, no padding)::

    b"LTW1"
    u32 entry_count
    entry_count x {
        u32 name_len, name (UTF-8),
        u32 ndim, ndim x u32 extents,
        prod(extents) x f32 values (row-major)
    }
"""

from __future__ import annotations

import os
import struct
from collections.abc import Iterator, Mapping

import numpy as np

MAGIC = b"LTW1"


class WeightsError(Exception):
    """Base class for container errors; ``code`` doubles as a CLI exit status."""

    code = 10


class BadMagicError(WeightsError):
    code = 11


class TruncatedError(WeightsError):
    code = 12


class ShapeMismatchError(WeightsError):
    code = 13


class DuplicateNameError(WeightsError):
    code = 14


class MissingWeightError(WeightsError, KeyError):
    code = 15

    def __str__(self) -> str:
        return self.args[0] if self.args else "missing weight"


class WeightsContainer(Mapping):
    """Ordered, read-only mapping from parameter name to float32 tensor."""

    def __init__(self, entries=None):
        self._entries: dict[str, np.ndarray] = {}
        for name, value in (entries or {}).items():
            self._add(name, value)

    def _add(self, name: str, value) -> None:
        if name in self._entries:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        arr = np.array(value, dtype=np.float32, order="C")
        arr.setflags(write=False)
        self._entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise MissingWeightError(f"missing weight tensor {name!r}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def replace(self, updates: Mapping[str, np.ndarray]) -> "WeightsContainer":
        """Copy with some tensors replaced (or added)."""
        merged = dict(self._entries)
        merged.update(updates)
        return WeightsContainer(merged)

    def num_parameters(self, prefix: str = "") -> int:
        return sum(v.size for k, v in self._entries.items() if k.startswith(prefix))

    def check_manifest(self, manifest: Mapping[str, tuple[int, ...]]) -> None:
        for name, shape in manifest.items():
            got = self[name].shape
            if tuple(got) != tuple(shape):
                raise ShapeMismatchError(f"{name}: expected shape {tuple(shape)}, got {tuple(got)}")

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<I", len(self._entries))]
        for name, arr in self._entries.items():
            raw = name.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
            parts.append(struct.pack("<I", arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.astype("<f4").tobytes(order="C"))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "WeightsContainer":
        if len(buf) < 4 or buf[:4] != MAGIC:
            raise BadMagicError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
        pos = 4

        def take(n: int) -> bytes:
            nonlocal pos
            if pos + n > len(buf):
                raise TruncatedError(f"file truncated at byte {pos} (needed {n} more)")
            chunk = buf[pos:pos + n]
            pos += n
            return chunk

        (count,) = struct.unpack("<I", take(4))
        out = cls()
        for _ in range(count):
            (name_len,) = struct.unpack("<I", take(4))
            name = take(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", take(4))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            n = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape)
            out._add(name, arr)
        if pos != len(buf):
            raise WeightsError(f"{len(buf) - pos} trailing bytes after last entry")
        return out


def save_weights(weights: WeightsContainer, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        f.write(weights.to_bytes())


def load_weights(path: str | os.PathLike, manifest: Mapping[str, tuple[int, ...]] | None = None) -> WeightsContainer:
    """Read an LTW1 file; if ``manifest`` is given, validate names and shapes."""
    with open(path, "rb") as f:
        buf = f.read()
    weights = WeightsContainer.from_bytes(buf)
    if manifest is not None:
        weights.check_manifest(manifest)
    return weights
