"""Gated recurrent units, unidirectional and bidirectional, with full BPTT.

Gate convention (the update gate weights the candidate)::

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wc + (r * h) Uc + bc)
    h' = (1 - z) * h + z * c

Weights are stored gate-stacked as ``wx (d, 3H)``, ``wh (H, 3H)``, ``b (3H,)``
in (z, r, c) order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..kernels import sigmoid


@dataclass
class GruParams:
    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]

    @classmethod
    def init(cls, d: int, hidden: int, rng, dtype=np.float32):
        bound = 1.0 / np.sqrt(hidden)
        wx = rng.uniform(-bound, bound, (d, 3 * hidden)).astype(dtype)
        wh = rng.uniform(-bound, bound, (hidden, 3 * hidden)).astype(dtype)
        return cls(wx, wh, np.zeros(3 * hidden, dtype))

    def named_parameters(self, prefix):
        return [(f"{prefix}.wx", self.wx), (f"{prefix}.wh", self.wh), (f"{prefix}.b", self.b)]


def gru_forward(x: np.ndarray, p: GruParams):
    """``x`` is (n, t, d); returns hidden states (n, t, H) and a cache."""
    if x.ndim != 3 or x.shape[2] != p.wx.shape[0]:
        raise ShapeError(f"GRU expects (n, t, {p.wx.shape[0]}) input, got {x.shape}")
    n, t_len, _ = x.shape
    hd = p.hidden
    a = x @ p.wx + p.b
    wh_zr, wh_c = p.wh[:, : 2 * hd], p.wh[:, 2 * hd :]
    h = np.zeros((n, hd), dtype=x.dtype)
    hs = np.empty((n, t_len, hd), dtype=x.dtype)
    steps = []
    for t in range(t_len):
        zr = sigmoid(a[:, t, : 2 * hd] + h @ wh_zr)
        z, r = zr[:, :hd], zr[:, hd:]
        rh = r * h
        c = np.tanh(a[:, t, 2 * hd :] + rh @ wh_c)
        steps.append((h, z, r, rh, c))
        h = (1 - z) * h + z * c
        hs[:, t] = h
    return hs, (x, steps)


def gru_backward(cache, p: GruParams, grad_h: np.ndarray):
    """Return ``(grad_x, {"wx", "wh", "b"})`` given the gradient of every hidden state."""
    x, steps = cache
    hd = p.hidden
    wh_zr, wh_c = p.wh[:, : 2 * hd], p.wh[:, 2 * hd :]
    grad_a = np.empty(grad_h.shape[:2] + (3 * hd,), dtype=grad_h.dtype)
    g_wh = np.zeros_like(p.wh)
    carry = np.zeros_like(grad_h[:, 0])
    for t in range(len(steps) - 1, -1, -1):
        h_prev, z, r, rh, c = steps[t]
        dh = grad_h[:, t] + carry
        da_c = dh * z * (1 - c * c)
        dz = dh * (c - h_prev)
        carry = dh * (1 - z)
        g_wh[:, 2 * hd :] += rh.T @ da_c
        drh = da_c @ wh_c.T
        carry += drh * r
        da_zr = np.concatenate([dz * z * (1 - z), drh * h_prev * r * (1 - r)], axis=1)
        g_wh[:, : 2 * hd] += h_prev.T @ da_zr
        carry += da_zr @ wh_zr.T
        grad_a[:, t, : 2 * hd] = da_zr
        grad_a[:, t, 2 * hd :] = da_c
    flat_a = grad_a.reshape(-1, 3 * hd)
    grads = {
        "wx": x.reshape(-1, x.shape[2]).T @ flat_a,
        "wh": g_wh,
        "b": flat_a.sum(axis=0),
    }
    return grad_a @ p.wx.T, grads


def bigru_forward(x: np.ndarray, fwd: GruParams, bwd: GruParams):
    """Concatenate forward and time-reversed passes: (n, t, 2H)."""
    hf, cf = gru_forward(x, fwd)
    hb, cb = gru_forward(x[:, ::-1], bwd)
    return np.concatenate([hf, hb[:, ::-1]], axis=2), (cf, cb)


def bigru_backward(cache, fwd: GruParams, bwd: GruParams, grad_out: np.ndarray):
    cf, cb = cache
    hd = fwd.hidden
    gxf, gf = gru_backward(cf, fwd, grad_out[:, :, :hd])
    gxb, gb = gru_backward(cb, bwd, np.ascontiguousarray(grad_out[:, ::-1, hd:]))
    return gxf + gxb[:, ::-1], gf, gb
