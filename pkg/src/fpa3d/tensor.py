"""Rank-5 tensors in (n, c, t, h, w) layout.

Tensors are plain C-contiguous numpy arrays with ``ndim == 5``. The helpers
here validate shapes, never broadcast, and never mutate their inputs.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import FormatError, ShapeError, SizeError, TruncationError

VID5_MAGIC = b"VID5"
_INDEX_MAX = np.iinfo(np.intp).max


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float
    seed: int


Fill = Union[str, float, Uniform]


def check_shape(shape) -> tuple[int, int, int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 5:
        raise ShapeError(f"expected 5 extents (n, c, t, h, w), got {shape}")
    if any(s < 1 for s in shape):
        raise ShapeError(f"every extent must be >= 1, got {shape}")
    count = 1
    for s in shape:
        count *= s
    if count > _INDEX_MAX:
        raise SizeError(f"element count {count} of shape {shape} overflows the index type")
    return shape


def as_tensor5(x, name: str = "x") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 5:
        raise ShapeError(f"{name} must be rank 5 (n, c, t, h, w), got shape {x.shape}")
    check_shape(x.shape)
    return x


def substream(seed: int, name: str) -> np.random.SeedSequence:
    """Named, independent random sub-stream derived from one master seed."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def create(shape, fill: Fill = "zeros", dtype=np.float32) -> np.ndarray:
    shape = check_shape(shape)
    if isinstance(fill, Uniform):
        rng = np.random.default_rng(fill.seed)
        # Draw in float64 so the values are identical for both precisions.
        return rng.uniform(fill.lo, fill.hi, size=shape).astype(dtype)
    if isinstance(fill, str):
        if fill != "zeros":
            raise ValueError(f"unknown fill {fill!r}")
        return np.zeros(shape, dtype=dtype)
    return np.full(shape, fill, dtype=dtype)


def elementwise(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    a = as_tensor5(a, "a")
    b = as_tensor5(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape} (no broadcasting)")
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown elementwise kind {kind!r}")


def add_n(*tensors: np.ndarray) -> np.ndarray:
    """Sum of several tensors, accumulated strictly left to right."""
    out = np.array(tensors[0], copy=True)
    for t in tensors[1:]:
        out = elementwise(out, t, "add")
    return out


def pad_time_replicate(x: np.ndarray, extra: int) -> np.ndarray:
    x = as_tensor5(x)
    if extra < 0:
        raise ShapeError(f"extra must be >= 0, got {extra}")
    if extra == 0:
        return x.copy()
    tail = np.repeat(x[:, :, -1:], extra, axis=2)
    return np.concatenate([x, tail], axis=2)


def crop_time(x: np.ndarray, t_target: int) -> np.ndarray:
    x = as_tensor5(x)
    if not 1 <= t_target <= x.shape[2]:
        raise ShapeError(f"cannot crop {x.shape[2]} frames to {t_target}")
    return np.ascontiguousarray(x[:, :, :t_target])


def save_vid5(path, x: np.ndarray) -> None:
    x = as_tensor5(x)
    header = VID5_MAGIC + struct.pack("<5I", *x.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_vid5(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != VID5_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {VID5_MAGIC!r}")
    if len(raw) < 24:
        raise TruncationError(f"{path}: header truncated")
    shape = check_shape(struct.unpack("<5I", raw[4:24]))
    count = int(np.prod(shape))
    if len(raw) != 24 + 4 * count:
        raise TruncationError(f"{path}: expected {4 * count} payload bytes, found {len(raw) - 24}")
    return np.frombuffer(raw, dtype="<f4", offset=24).astype(np.float32).reshape(shape)
