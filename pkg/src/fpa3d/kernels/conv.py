"""3D cross-correlation with zero padding, forward and backward.

Each batch item is lowered to a column matrix whose rows run
kernel-time-major, then kernel rows, kernel columns, input channel. The
per-item products are dispatched on the worker pool and reduced in
sample order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from ..parallel import pmap
from ..tensor import as_tensor5


def _triple(v) -> tuple[int, int, int]:
    if np.isscalar(v):
        return (int(v),) * 3
    v = tuple(int(i) for i in v)
    if len(v) != 3:
        raise ShapeError(f"expected a (t, h, w) triple, got {v}")
    return v


@dataclass
class Conv3dParams:
    weight: np.ndarray  # (c_out, c_in, k_t, k_h, k_w)
    bias: np.ndarray  # (c_out,)
    stride: tuple = (1, 1, 1)
    padding: tuple = (0, 0, 0)

    def __post_init__(self):
        self.stride = _triple(self.stride)
        self.padding = _triple(self.padding)
        if self.weight.ndim != 5:
            raise ShapeError(f"conv weight must be rank 5, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match {self.weight.shape[0]} output channels")
        if any(k % 2 == 0 for k in self.weight.shape[2:]):
            raise ShapeError(f"kernel extents must be odd, got {self.weight.shape[2:]}")
        if any(s not in (1, 2) for s in self.stride):
            raise ShapeError(f"strides must be 1 or 2, got {self.stride}")

    @property
    def kernel(self) -> tuple[int, int, int]:
        return tuple(self.weight.shape[2:])

    @property
    def fan_in(self) -> int:
        return int(np.prod(self.weight.shape[1:]))

    @classmethod
    def init(cls, c_out, c_in, kernel, stride=1, padding=None, rng=None, dtype=np.float32):
        """Uniform init in +-sqrt(1/fan_in); padding defaults to 'same' (k // 2)."""
        kernel = _triple(kernel)
        if padding is None:
            padding = tuple(k // 2 for k in kernel)
        rng = np.random.default_rng(rng)
        bound = np.sqrt(1.0 / (c_in * np.prod(kernel)))
        w = rng.uniform(-bound, bound, size=(c_out, c_in) + kernel).astype(dtype)
        return cls(w, np.zeros(c_out, dtype=dtype), stride, padding)


def conv_output_extents(in_extents, kernel, stride, padding) -> tuple[int, int, int]:
    return tuple((d + 2 * p - k) // s + 1 for d, k, s, p in zip(in_extents, kernel, stride, padding))


@dataclass
class ConvCache:
    x_shape: tuple
    out_extents: tuple
    cols: list = field(repr=False)


def _columns(xn, kernel, stride, padding, out_ext):
    pt, ph, pw = padding
    if pt or ph or pw:
        xn = np.pad(xn, ((0, 0), (pt, pt), (ph, ph), (pw, pw)))
    st, sh, sw = stride
    to, ho, wo = out_ext
    win = sliding_window_view(xn, kernel, axis=(1, 2, 3))
    win = win[:, : st * (to - 1) + 1 : st, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw]
    # (c, to, ho, wo, kt, kh, kw) -> rows (kt, kh, kw, c), columns (to, ho, wo)
    return win.transpose(4, 5, 6, 0, 1, 2, 3).reshape(-1, to * ho * wo)


def _weight_matrix(w):
    return w.transpose(0, 2, 3, 4, 1).reshape(w.shape[0], -1)


def conv3d(x: np.ndarray, p: Conv3dParams, return_cache: bool = False):
    x = as_tensor5(x)
    if x.shape[1] != p.weight.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {p.weight.shape[1]}")
    out_ext = conv_output_extents(x.shape[2:], p.kernel, p.stride, p.padding)
    if any(e < 1 for e in out_ext):
        raise ShapeError(f"conv output extents {out_ext} empty for input {x.shape} and kernel {p.kernel}")
    wm = _weight_matrix(p.weight)
    c_out = wm.shape[0]

    def one(n):
        cols = _columns(x[n], p.kernel, p.stride, p.padding, out_ext)
        y = wm @ cols
        y += p.bias[:, None]
        return cols, y.reshape((c_out,) + out_ext)

    results = pmap(one, range(x.shape[0]))
    out = np.stack([r[1] for r in results])
    if return_cache:
        return out, ConvCache(x.shape, out_ext, [r[0] for r in results])
    return out


def conv3d_backward(x_or_cache, p: Conv3dParams, grad_out: np.ndarray, input_grad: bool = True):
    """Return ``(grad_x, grad_weight, grad_bias)``.

    Accepts either the forward input or the cache returned by
    ``conv3d(..., return_cache=True)``; the cache saves re-lowering ``x``.
    With ``input_grad=False`` the first element is ``None``.
    """
    if isinstance(x_or_cache, ConvCache):
        cache = x_or_cache
    else:
        _, cache = conv3d(x_or_cache, p, return_cache=True)
    n, c_in, t, h, w = cache.x_shape
    expected = (n, p.weight.shape[0]) + cache.out_extents
    if grad_out.shape != expected:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv output {expected}")
    wm = _weight_matrix(p.weight)
    c_out = wm.shape[0]
    kt, kh, kw = p.kernel
    st, sh, sw = p.stride
    pt, ph, pw = p.padding
    to, ho, wo = cache.out_extents

    def one(i):
        g = grad_out[i].reshape(c_out, -1)
        gw = g @ cache.cols[i].T
        if not input_grad:
            return None, gw
        gcols = (wm.T @ g).reshape(kt, kh, kw, c_in, to, ho, wo)
        gx = np.zeros((c_in, t + 2 * pt, h + 2 * ph, w + 2 * pw), dtype=grad_out.dtype)
        for a in range(kt):
            for b in range(kh):
                for c in range(kw):
                    gx[:, a : a + st * (to - 1) + 1 : st, b : b + sh * (ho - 1) + 1 : sh,
                       c : c + sw * (wo - 1) + 1 : sw] += gcols[a, b, c]
        return gx[:, pt : pt + t, ph : ph + h, pw : pw + w], gw

    results = pmap(one, range(n))
    grad_x = np.stack([r[0] for r in results]) if input_grad else None
    gw_mat = results[0][1].copy()
    for r in results[1:]:
        gw_mat += r[1]
    grad_w = gw_mat.reshape(c_out, kt, kh, kw, c_in).transpose(0, 4, 1, 2, 3)
    grad_b = grad_out.sum(axis=(0, 2, 3, 4))
    return grad_x, np.ascontiguousarray(grad_w), grad_b
