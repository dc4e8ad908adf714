from __future__ import annotations

import numpy as np


def relu(x):
    return np.maximum(x, 0)


def sigmoid(x):
    x = np.asarray(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)


def softmax(x, axis=1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def log_softmax_backward(logp, grad_out, axis=-1):
    return grad_out - np.exp(logp) * grad_out.sum(axis=axis, keepdims=True)


_FORWARD = {
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "identity": lambda x: x.copy(),
    "softmax_over_channels": lambda x: softmax(x, axis=1),
}


def activation(x, kind: str):
    try:
        fn = _FORWARD[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def activation_backward(kind: str, x, y, grad_out):
    """Gradient w.r.t. the activation input, given input ``x`` and output ``y``."""
    if kind == "relu":
        return grad_out * (x > 0)
    if kind == "sigmoid":
        return grad_out * y * (1 - y)
    if kind == "tanh":
        return grad_out * (1 - y * y)
    if kind == "identity":
        return grad_out.copy()
    if kind == "softmax_over_channels":
        return y * (grad_out - (grad_out * y).sum(axis=1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")
