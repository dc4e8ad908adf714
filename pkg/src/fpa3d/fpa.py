"""Feature pyramid attention, spatial (2D) and spatiotemporal (3D).

A bottom-up path of stride-2 convolutions builds ``levels`` coarser maps.
A top-down path fuses them coarse to fine: a lateral convolution on each
level plus the upsampled coarser result. The finest fused map is resized
to the input, squashed into a mask, and multiplied with the input. There
is no projection of the input before the product and no global pooling
branch.
"""
from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CorruptionError, DegenerateBatchError, ShapeError
from .kernels import BatchNormState, Conv3dParams, activation, activation_backward, resize_to, resize_to_backward
from .layers import ConvUnit, derive_seed, unit_backward, unit_forward
from .tensor import as_tensor5

_VARIANTS = {"2d": "spatial_2d", "spatial_2d": "spatial_2d", "3d": "spatiotemporal_3d", "spatiotemporal_3d": "spatiotemporal_3d"}


@dataclass
class FpaConfig:
    variant: str = "spatiotemporal_3d"
    levels: int = 3
    kernel: int = 3
    mask_activation: str = "sigmoid"
    use_batchnorm: bool = True
    dropout: float = 0.3

    def __post_init__(self):
        try:
            self.variant = _VARIANTS[self.variant]
        except KeyError:
            raise ArgumentError(f"unknown FPA variant {self.variant!r}") from None
        if self.levels < 1:
            raise ArgumentError(f"levels must be >= 1, got {self.levels}")
        if self.mask_activation not in ("sigmoid", "identity"):
            raise ArgumentError(f"mask activation must be sigmoid or identity, got {self.mask_activation!r}")

    @property
    def temporal(self) -> bool:
        return self.variant == "spatiotemporal_3d"

    @property
    def stride(self) -> tuple[int, int, int]:
        return (2, 2, 2) if self.temporal else (1, 2, 2)

    @property
    def kernel_size(self) -> tuple[int, int, int]:
        k = self.kernel
        return (k, k, k) if self.temporal else (1, k, k)


@dataclass
class FpaModule:
    config: FpaConfig
    channels: int
    down: list[ConvUnit]
    fuse: list[ConvUnit]
    dropout_seed: int = 0

    def units(self):
        for i, u in enumerate(self.down):
            yield f"down{i}", u
        for i, u in enumerate(self.fuse):
            yield f"fuse{i}", u

    def named_parameters(self):
        return [item for prefix, u in self.units() for item in u.named_parameters(prefix)]

    def named_buffers(self):
        return [item for prefix, u in self.units() for item in u.named_buffers(prefix)]

    def set_buffer(self, name: str, value: np.ndarray):
        prefix, _, rest = name.partition(".bn.")
        dict(self.units())[prefix].set_buffer(rest, value)

    def fingerprint(self) -> int:
        crc = 0
        for _, arr in self.named_parameters():
            crc = zlib.crc32(np.ascontiguousarray(arr).tobytes(), crc)
        return crc


@dataclass
class FpaCache:
    module_id: int
    fingerprint: int
    x: np.ndarray
    mask_pre: np.ndarray
    mask: np.ndarray
    level_extents: list
    down_caches: list = field(repr=False)
    fuse_caches: list = field(repr=False)
    fused_extents: list = field(default_factory=list)


def fpa_build(config: FpaConfig, c: int, init_seed: int = 0, dtype=np.float32, dropout_seed: int | None = None) -> FpaModule:
    if c < 1:
        raise ArgumentError(f"channel count must be >= 1, got {c}")
    rng = np.random.default_rng(init_seed)
    kernel = config.kernel_size

    def unit(stride, relu):
        conv = Conv3dParams.init(c, c, kernel, stride=stride, rng=rng, dtype=dtype)
        bn = BatchNormState.init(c, dtype) if config.use_batchnorm else None
        return ConvUnit(conv, bn, relu=relu, dropout=config.dropout)

    down = [unit(config.stride, True) for _ in range(config.levels)]
    fuse = [unit(1, False) for _ in range(config.levels)]
    if dropout_seed is None:
        dropout_seed = derive_seed(init_seed, 0xD0)
    return FpaModule(config, c, down, fuse, dropout_seed)


def level_extents(config: FpaConfig, extents) -> list[tuple[int, int, int]]:
    """Extents of every pyramid level for an input of ``(t, h, w)``."""
    out = []
    cur = tuple(extents)
    for _ in range(config.levels):
        cur = tuple(-(-d // s) for d, s in zip(cur, config.stride))
        out.append(cur)
    return out


def fpa_forward(m: FpaModule, x: np.ndarray, mode: str = "eval", dropout_key: int = 0):
    """Return ``(x * mask, cache)``. The output has the input's shape."""
    x = as_tensor5(x)
    cfg = m.config
    if x.shape[1] != m.channels:
        raise ShapeError(f"FPA built for {m.channels} channels, input has {x.shape[1]}")
    strided = x.shape[2:] if cfg.temporal else x.shape[3:]
    if min(strided) < 4:
        warnings.warn(f"input extents {x.shape[2:]} collapse the coarsest pyramid level to a single cell", stacklevel=2)

    def seed(k):
        return derive_seed(m.dropout_seed, dropout_key, k)

    levels, down_caches = [], []
    h = x
    for i, u in enumerate(m.down):
        try:
            h, c = unit_forward(u, h, mode, seed(i))
        except DegenerateBatchError as e:
            raise ShapeError(f"pyramid level {i + 1} is too small for train-mode normalization: {e}") from e
        levels.append(h)
        down_caches.append(c)

    n_lv = len(levels)
    fuse_caches = [None] * n_lv
    fused_extents = [None] * n_lv
    top = n_lv - 1
    fused, fuse_caches[top] = unit_forward(m.fuse[top], levels[top], mode, seed(n_lv + top))
    fused_extents[top] = fused.shape[2:]
    for i in range(top - 1, -1, -1):
        lateral, fuse_caches[i] = unit_forward(m.fuse[i], levels[i], mode, seed(n_lv + i))
        fused = lateral + resize_to(fused, *lateral.shape[2:])
        fused_extents[i] = fused.shape[2:]
    mask_pre = resize_to(fused, *x.shape[2:])
    mask = activation(mask_pre, cfg.mask_activation)
    cache = FpaCache(id(m), m.fingerprint(), x, mask_pre, mask,
                     [lv.shape[2:] for lv in levels], down_caches, fuse_caches, fused_extents)
    return x * mask, cache


def fpa_backward(m: FpaModule, cache: FpaCache, grad_out: np.ndarray):
    """Return ``(grad_x, grad_params)`` with ``grad_params`` keyed like ``named_parameters``."""
    if cache.module_id != id(m) or cache.fingerprint != m.fingerprint():
        raise CorruptionError("FPA cache is stale: module parameters changed since the forward pass")
    if grad_out.shape != cache.x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match input {cache.x.shape}")
    grads: dict = {}
    grad_x = grad_out * cache.mask
    g = activation_backward(m.config.mask_activation, cache.mask_pre, cache.mask, grad_out * cache.x)
    g = resize_to_backward(g, cache.fused_extents[0])

    n_lv = len(m.down)
    level_grads = [None] * n_lv
    for i in range(n_lv - 1):
        level_grads[i] = unit_backward(m.fuse[i], cache.fuse_caches[i], g, grads, f"fuse{i}")
        g = resize_to_backward(g, cache.fused_extents[i + 1])
    level_grads[-1] = unit_backward(m.fuse[-1], cache.fuse_caches[-1], g, grads, f"fuse{n_lv - 1}")

    g = level_grads[-1]
    for i in range(n_lv - 1, -1, -1):
        g_in = unit_backward(m.down[i], cache.down_caches[i], g, grads, f"down{i}")
        g = g_in + level_grads[i - 1] if i > 0 else g_in
    grad_x = grad_x + g
    ordered = {name: grads[name] for name, _ in m.named_parameters()}
    return grad_x, ordered
