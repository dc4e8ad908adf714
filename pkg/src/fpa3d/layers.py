"""Convolution unit shared by the pyramid and the backbone: conv, norm, relu, dropout."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .kernels import (
    BatchNormState,
    Conv3dParams,
    batchnorm3d,
    batchnorm3d_backward,
    conv3d,
    conv3d_backward,
    dropout3d,
    dropout3d_backward,
)


def derive_seed(*parts: int) -> int:
    """Stable 64-bit integer from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ConvUnit:
    conv: Conv3dParams
    bn: BatchNormState | None = None
    relu: bool = True
    dropout: float = 0.0

    def named_parameters(self, prefix: str):
        # A conv bias followed by batch norm is cancelled by the mean
        # subtraction; it stays fixed and the norm's beta takes its role.
        if self.bn is None:
            return [(f"{prefix}.weight", self.conv.weight), (f"{prefix}.bias", self.conv.bias)]
        return [(f"{prefix}.weight", self.conv.weight),
                (f"{prefix}.bn.gamma", self.bn.gamma), (f"{prefix}.bn.beta", self.bn.beta)]

    def named_buffers(self, prefix: str):
        if self.bn is None:
            return []
        return [(f"{prefix}.bn.running_mean", self.bn.running_mean),
                (f"{prefix}.bn.running_var", self.bn.running_var)]

    def set_buffer(self, name: str, value: np.ndarray):
        self.bn = dataclasses.replace(self.bn, **{name: value})


def unit_forward(u: ConvUnit, x: np.ndarray, mode: str, seed: int):
    """Run the unit; updates ``u.bn`` running statistics in train mode."""
    y, conv_cache = conv3d(x, u.conv, return_cache=True)
    bn_cache = None
    if u.bn is not None:
        y, u.bn, bn_cache = batchnorm3d(y, u.bn, mode)
    if u.relu:
        pre = y
        y = np.maximum(y, 0)
    else:
        pre = None
    y, mask = dropout3d(y, u.dropout, seed, mode)
    return y, (conv_cache, bn_cache, pre, mask)


def unit_backward(u: ConvUnit, cache, grad_out: np.ndarray, grads: dict, prefix: str, input_grad: bool = True):
    """Accumulate parameter gradients into ``grads`` and return the input gradient."""
    conv_cache, bn_cache, pre, mask = cache
    g = dropout3d_backward(mask, grad_out)
    if pre is not None:
        g = g * (pre > 0)
    if bn_cache is not None:
        g, gg, gb = batchnorm3d_backward(bn_cache, g)
        grads[f"{prefix}.bn.gamma"] = gg
        grads[f"{prefix}.bn.beta"] = gb
    gx, gw, gbias = conv3d_backward(conv_cache, u.conv, g, input_grad)
    grads[f"{prefix}.weight"] = gw
    if bn_cache is None:
        grads[f"{prefix}.bias"] = gbias
    return gx
