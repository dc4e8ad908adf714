from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import CorruptionError, ShapeError
from ..tensor import as_tensor5


def maxpool3d(x: np.ndarray, window=(1, 2, 2), stride=None):
    """Max over (t, h, w) windows.

    Returns ``(out, argmax)`` where ``argmax`` holds flat indices into ``x``.
    Ties resolve to the first element in (t, h, w) scan order.
    """
    x = as_tensor5(x)
    window = tuple(int(v) for v in window)
    stride = window if stride is None else tuple(int(v) for v in stride)
    n, c = x.shape[:2]
    out_ext = tuple((d - k) // s + 1 for d, k, s in zip(x.shape[2:], window, stride))
    if any(e < 1 for e in out_ext):
        raise ShapeError(f"maxpool window {window} leaves an empty output for input {x.shape}")
    to, ho, wo = out_ext
    st, sh, sw = stride
    win = sliding_window_view(x, window, axis=(2, 3, 4))
    win = win[:, :, : st * (to - 1) + 1 : st, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw]
    flat = win.reshape(n, c, to, ho, wo, -1)
    local = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]

    a, b, d = np.unravel_index(local, window)
    ni, ci, ti, hi, wi = np.indices((n, c, to, ho, wo), sparse=True)
    src = np.ravel_multi_index((ni, ci, ti * st + a, hi * sh + b, wi * sw + d), x.shape)
    return out, src


def maxpool3d_backward(argmax: np.ndarray, grad_out: np.ndarray, input_shape) -> np.ndarray:
    if argmax.shape != grad_out.shape:
        raise ShapeError(f"argmax shape {argmax.shape} does not match grad_out {grad_out.shape}")
    size = int(np.prod(input_shape))
    idx = argmax.ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise CorruptionError("maxpool argmax index outside the input buffer")
    grad = np.bincount(idx, weights=grad_out.ravel(), minlength=size)
    return grad.astype(grad_out.dtype, copy=False).reshape(input_shape)
