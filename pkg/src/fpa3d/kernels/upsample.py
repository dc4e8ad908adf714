"""Size reconciliation for the pyramid's top-down path.

Spatial axes use align-corners bilinear interpolation. The time axis uses
nearest duplication by two, replicating the last frame first when the
target length is not exactly double.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..tensor import as_tensor5, crop_time, pad_time_replicate


def _lerp_plan(src: int, dst: int):
    if src == 1 or dst == 1:
        coord = np.zeros(dst)
    else:
        coord = np.arange(dst) * (src - 1) / (dst - 1)
    i0 = np.clip(np.floor(coord).astype(np.intp), 0, src - 1)
    i1 = np.minimum(i0 + 1, src - 1)
    return i0, i1, coord - i0


def _lerp_matrix(src: int, dst: int) -> np.ndarray:
    i0, i1, f = _lerp_plan(src, dst)
    m = np.zeros((dst, src))
    np.add.at(m, (np.arange(dst), i0), 1.0 - f)
    np.add.at(m, (np.arange(dst), i1), f)
    return m


def _lerp_axis(x, axis, dst):
    i0, i1, f = _lerp_plan(x.shape[axis], dst)
    shape = [1] * x.ndim
    shape[axis] = dst
    f = f.astype(x.dtype).reshape(shape)
    v0 = np.take(x, i0, axis=axis)
    v1 = np.take(x, i1, axis=axis)
    out = v0 + f * (v1 - v0)
    # Rounding guard: keep every value inside its two source samples.
    return np.clip(out, np.minimum(v0, v1), np.maximum(v0, v1))


def upsample_bilinear_spatial(x: np.ndarray, h_out: int, w_out: int) -> np.ndarray:
    x = as_tensor5(x)
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"target spatial size must be positive, got {h_out}x{w_out}")
    if (h_out, w_out) == x.shape[3:]:
        return x.copy()
    return _lerp_axis(_lerp_axis(x, 4, w_out), 3, h_out)


def upsample_bilinear_spatial_backward(grad_out: np.ndarray, h_in: int, w_in: int) -> np.ndarray:
    h_out, w_out = grad_out.shape[3:]
    if (h_out, w_out) == (h_in, w_in):
        return grad_out.copy()
    mh = _lerp_matrix(h_in, h_out).astype(grad_out.dtype)
    mw = _lerp_matrix(w_in, w_out).astype(grad_out.dtype)
    return np.matmul(np.matmul(mh.T, grad_out), mw)


def temporal_source_index(t_in: int, t_out: int) -> np.ndarray:
    """Source frame feeding each output frame of :func:`upsample_temporal`."""
    if t_out == t_in:
        return np.arange(t_in)
    return np.minimum(np.arange(t_out) // 2, t_in - 1)


def upsample_temporal(x: np.ndarray, t_out: int) -> np.ndarray:
    x = as_tensor5(x)
    t = x.shape[2]
    if t_out < t:
        raise ShapeError(f"cannot upsample {t} frames down to {t_out}")
    if t_out == t:
        return x.copy()
    extra = max(0, -(-t_out // 2) - t)
    doubled = np.repeat(pad_time_replicate(x, extra), 2, axis=2)
    return crop_time(doubled, t_out)


def upsample_temporal_backward(grad_out: np.ndarray, t_in: int) -> np.ndarray:
    src = temporal_source_index(t_in, grad_out.shape[2])
    shape = list(grad_out.shape)
    shape[2] = t_in
    grad = np.zeros(shape, dtype=grad_out.dtype)
    for j, s in enumerate(src):
        grad[:, :, s] += grad_out[:, :, j]
    return grad


def resize_to(x: np.ndarray, t: int, h: int, w: int) -> np.ndarray:
    """Temporal then spatial upsampling of ``x`` to extents ``(t, h, w)``."""
    return upsample_bilinear_spatial(upsample_temporal(x, t), h, w)


def resize_to_backward(grad_out: np.ndarray, src_extents) -> np.ndarray:
    t_in, h_in, w_in = src_extents
    g = upsample_bilinear_spatial_backward(grad_out, h_in, w_in)
    return upsample_temporal_backward(g, t_in)
