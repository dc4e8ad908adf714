"""Binary checkpoint format.

Layout, all integers little-endian::

    b"FPA3D\\0"  u32 version  u32 tensor_count
    per tensor: u16 name_len, utf-8 name, u8 rank, rank x u32 extents,
                float32 payload

Adam moments are stored as ``<param>.m`` / ``<param>.v`` and the step
count as the rank-0 tensor ``adam.step``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, TruncationError, VersionError
from .optim import AdamState

MAGIC = b"FPA3D\0"
VERSION = 1
SUPPORTED_VERSIONS = (1,)


def save_tensors(path, tensors: dict) -> None:
    out = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(out))


def load_tensors(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic {raw[:len(MAGIC)]!r})")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise TruncationError(f"{path}: truncated at byte {pos}")
        chunk = raw[pos : pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version not in SUPPORTED_VERSIONS:
        raise VersionError(f"{path}: checkpoint version {version} unsupported; supported versions: "
                           + ", ".join(map(str, SUPPORTED_VERSIONS)))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float32).reshape(shape)
    if pos != len(raw):
        raise FormatError(f"{path}: {len(raw) - pos} trailing bytes after the last tensor")
    return tensors


def model_tensors(model, adam: AdamState | None = None) -> dict:
    tensors = dict(model.named_parameters())
    tensors.update(model.named_buffers())
    if adam is not None:
        for name, _ in model.named_parameters():
            if name in adam.m:
                tensors[f"{name}.m"] = adam.m[name]
                tensors[f"{name}.v"] = adam.v[name]
        tensors["adam.step"] = np.array(adam.step, dtype=np.float32)
    return tensors


def save_checkpoint(path, model, adam: AdamState | None = None) -> None:
    save_tensors(path, model_tensors(model, adam))


def load_checkpoint(path, model) -> AdamState:
    """Copy checkpoint tensors into ``model``; returns the stored Adam state."""
    tensors = load_tensors(path)
    params = dict(model.named_parameters())
    for name, arr in params.items():
        if name not in tensors:
            raise FormatError(f"{path}: missing tensor {name!r} required by the model configuration")
        if tensors[name].shape != arr.shape:
            raise FormatError(f"{path}: tensor {name!r} has shape {tensors[name].shape}, model expects {arr.shape}")
        arr[...] = tensors[name]
    for name, arr in model.named_buffers():
        if name in tensors:
            model.set_buffer(name, tensors[name].astype(arr.dtype))
    adam = AdamState()
    if "adam.step" in tensors:
        adam.step = int(tensors["adam.step"])
        for name, arr in params.items():
            if f"{name}.m" in tensors:
                adam.m[name] = tensors[f"{name}.m"].astype(arr.dtype)
                adam.v[name] = tensors[f"{name}.v"].astype(arr.dtype)
    return adam
