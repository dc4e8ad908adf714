"""Batch normalization over (n, t, h, w) per channel, and inverted dropout."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateBatchError, ShapeError
from ..tensor import as_tensor5

_AXES = (0, 2, 3, 4)


def _per_channel(v):
    return v.reshape(1, -1, 1, 1, 1)


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.9
    eps: float = 1e-5
    mode: str = "train"

    @classmethod
    def init(cls, c: int, dtype=np.float32, **kw):
        return cls(np.ones(c, dtype), np.zeros(c, dtype), np.zeros(c, dtype), np.ones(c, dtype), **kw)


@dataclass
class BatchNormCache:
    mode: str
    xhat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def batchnorm3d(x: np.ndarray, s: BatchNormState, mode: str | None = None):
    """Return ``(y, updated_state, cache)``; ``s`` itself is left untouched."""
    x = as_tensor5(x)
    mode = mode or s.mode
    if s.gamma.shape != (x.shape[1],) or s.beta.shape != (x.shape[1],):
        raise ShapeError(f"batchnorm parameters sized {s.gamma.shape} for {x.shape[1]} channels")
    if mode == "train":
        count = x.size // x.shape[1]
        if count < 2:
            raise DegenerateBatchError("train-mode batchnorm needs at least 2 values per channel")
        mean = x.mean(axis=_AXES)
        centered = x - _per_channel(mean)
        var = (centered * centered).mean(axis=_AXES)
        m = s.momentum
        new_state = dataclasses.replace(
            s,
            running_mean=(m * s.running_mean + (1 - m) * mean).astype(s.running_mean.dtype),
            running_var=(m * s.running_var + (1 - m) * var).astype(s.running_var.dtype),
        )
    elif mode == "eval":
        centered = x - _per_channel(s.running_mean)
        var = s.running_var
        new_state = s
    else:
        raise ValueError(f"unknown batchnorm mode {mode!r}")
    inv_std = (1.0 / np.sqrt(var + s.eps)).astype(x.dtype)
    xhat = centered * _per_channel(inv_std)
    y = xhat * _per_channel(s.gamma) + _per_channel(s.beta)
    return y, new_state, BatchNormCache(mode, xhat, inv_std, s.gamma)


def batchnorm3d_backward(cache: BatchNormCache, grad_out: np.ndarray):
    """Return ``(grad_x, grad_gamma, grad_beta)``."""
    grad_beta = grad_out.sum(axis=_AXES)
    grad_gamma = (grad_out * cache.xhat).sum(axis=_AXES)
    dxhat = grad_out * _per_channel(cache.gamma)
    if cache.mode == "eval":
        return dxhat * _per_channel(cache.inv_std), grad_gamma, grad_beta
    m = grad_out.size // grad_out.shape[1]
    mean_d = dxhat.sum(axis=_AXES) / m
    mean_dx = (dxhat * cache.xhat).sum(axis=_AXES) / m
    grad_x = (dxhat - _per_channel(mean_d) - cache.xhat * _per_channel(mean_dx)) * _per_channel(cache.inv_std)
    return grad_x, grad_gamma, grad_beta


def dropout3d(x: np.ndarray, rate: float, seed: int, mode: str = "train"):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is ``None`` when inactive.

    The keep mask comes from a counter-based Philox stream keyed by ``seed``,
    so it depends only on the seed and the tensor shape.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x.copy(), None
    u = np.random.Generator(np.random.Philox(key=int(seed))).random(x.shape)
    mask = ((u >= rate) / (1.0 - rate)).astype(x.dtype)
    return x * mask, mask


def dropout3d_backward(mask, grad_out: np.ndarray) -> np.ndarray:
    return grad_out.copy() if mask is None else grad_out * mask
