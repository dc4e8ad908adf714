"""LipNet-mini: three spatiotemporal conv blocks, two BiGRUs, per-frame softmax.

Attention modules can sit on the input video (``input``), after block 1
(``f1``) or after block 2 (``f2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, ShapeError
from ..fpa import FpaConfig, FpaModule, fpa_backward, fpa_build, fpa_forward
from ..kernels import BatchNormState, Conv3dParams, log_softmax, log_softmax_backward, maxpool3d, maxpool3d_backward
from ..kernels.conv import conv_output_extents
from ..layers import ConvUnit, derive_seed, unit_backward, unit_forward
from ..tensor import substream
from .gru import GruParams, bigru_backward, bigru_forward

POSITIONS = ("input", "f1", "f2")


@dataclass
class LipNetConfig:
    c: int = 1
    t: int = 24
    h: int = 32
    w: int = 32
    channels: tuple = (8, 16, 24)
    kernel: tuple = (3, 5, 5)
    conv1_stride: tuple = (1, 2, 2)
    pool: tuple = (1, 2, 2)
    hidden: int = 64
    num_classes: int = 28
    dropout: float = 0.3
    fpa: dict = field(default_factory=dict)  # position -> FpaConfig

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 3:
            raise ArgumentError(f"need three block widths, got {self.channels}")
        if self.num_classes < 2:
            raise ArgumentError("num_classes must be >= 2")
        for pos in self.fpa:
            if pos not in POSITIONS:
                raise ArgumentError(f"unknown FPA position {pos!r}; choose from {', '.join(POSITIONS)}")
        if any(e < 1 for e in self.block_extents()[-1]):
            raise ShapeError(f"input {self.t}x{self.h}x{self.w} does not survive the three blocks")

    def block_extents(self) -> list[tuple[int, int, int]]:
        """(t, h, w) after each block, time preserved throughout."""
        out = []
        cur = (self.t, self.h, self.w)
        pad = tuple(k // 2 for k in self.kernel)
        for i in range(3):
            stride = self.conv1_stride if i == 0 else (1, 1, 1)
            cur = conv_output_extents(cur, self.kernel, stride, pad)
            cur = tuple((d - k) // s + 1 for d, k, s in zip(cur, self.pool, self.pool))
            out.append(cur)
        return out

    @property
    def feature_dim(self) -> int:
        _, h, w = self.block_extents()[-1]
        return self.channels[-1] * h * w


@dataclass
class LipNet:
    config: LipNetConfig
    blocks: list  # ConvUnit per block
    fpas: dict  # position -> FpaModule
    grus: list  # [(fwd, bwd)] per layer
    out_w: np.ndarray
    out_b: np.ndarray
    dropout_seed: int = 0

    def named_parameters(self):
        params = []
        for pos in POSITIONS:
            if pos in self.fpas:
                params += [(f"fpa.{pos}.{k}", v) for k, v in self.fpas[pos].named_parameters()]
        for i, u in enumerate(self.blocks):
            params += u.named_parameters(f"block{i + 1}")
        for i, (f, b) in enumerate(self.grus):
            params += f.named_parameters(f"gru{i + 1}.fwd") + b.named_parameters(f"gru{i + 1}.bwd")
        params += [("out.weight", self.out_w), ("out.bias", self.out_b)]
        return params

    def named_buffers(self):
        bufs = []
        for pos in POSITIONS:
            if pos in self.fpas:
                bufs += [(f"fpa.{pos}.{k}", v) for k, v in self.fpas[pos].named_buffers()]
        for i, u in enumerate(self.blocks):
            bufs += u.named_buffers(f"block{i + 1}")
        return bufs

    def set_buffer(self, name: str, value: np.ndarray):
        if name.startswith("fpa."):
            _, pos, rest = name.split(".", 2)
            self.fpas[pos].set_buffer(rest, value)
        else:
            block, _, stat = name.split(".")
            self.blocks[int(block[5:]) - 1].set_buffer(stat, value)


def build_lipnet(config: LipNetConfig, seed: int = 0, dtype=np.float32) -> LipNet:
    rng = np.random.default_rng(substream(seed, "init"))
    blocks = []
    c_in = config.c
    pad = tuple(k // 2 for k in config.kernel)
    for i, c_out in enumerate(config.channels):
        stride = config.conv1_stride if i == 0 else (1, 1, 1)
        conv = Conv3dParams.init(c_out, c_in, config.kernel, stride, pad, rng=rng, dtype=dtype)
        blocks.append(ConvUnit(conv, BatchNormState.init(c_out, dtype), relu=True, dropout=config.dropout))
        c_in = c_out
    fpa_channels = {"input": config.c, "f1": config.channels[0], "f2": config.channels[1]}
    fpas = {}
    for pos in POSITIONS:
        if pos in config.fpa:
            fpas[pos] = fpa_build(config.fpa[pos], fpa_channels[pos], init_seed=int(rng.integers(2**31)), dtype=dtype)
    grus = []
    d = config.feature_dim
    for _ in range(2):
        grus.append((GruParams.init(d, config.hidden, rng, dtype), GruParams.init(d, config.hidden, rng, dtype)))
        d = 2 * config.hidden
    bound = 1.0 / np.sqrt(d)
    out_w = rng.uniform(-bound, bound, (d, config.num_classes)).astype(dtype)
    out_b = np.zeros(config.num_classes, dtype)
    dropout_seed = int(np.random.default_rng(substream(seed, "dropout")).integers(2**63))
    return LipNet(config, blocks, fpas, grus, out_w, out_b, dropout_seed)


def stcnn_block_forward(x: np.ndarray, unit: ConvUnit, pool, mode: str, seed: int):
    """conv -> batch norm -> relu -> dropout -> spatial max-pool."""
    y, unit_cache = unit_forward(unit, x, mode, seed)
    out, argmax = maxpool3d(y, pool, pool)
    return out, (unit_cache, argmax, y.shape)


def stcnn_block_backward(unit: ConvUnit, cache, grad_out, grads: dict, prefix: str, input_grad: bool = True):
    unit_cache, argmax, y_shape = cache
    g = maxpool3d_backward(argmax, grad_out, y_shape)
    return unit_backward(unit, unit_cache, g, grads, prefix, input_grad)


def lipnet_forward(model: LipNet, video: np.ndarray, mode: str = "eval", dropout_key: int = 0):
    """Per-frame class log-probabilities, shape (n, t, num_classes)."""
    cfg = model.config
    if video.ndim != 5 or video.shape[1:] != (cfg.c, cfg.t, cfg.h, cfg.w):
        raise ShapeError(f"video shape {video.shape} does not match config (n, {cfg.c}, {cfg.t}, {cfg.h}, {cfg.w})")
    caches = {}
    h = video
    for i, pos in enumerate(POSITIONS):
        if pos in model.fpas:
            h, caches[pos] = fpa_forward(model.fpas[pos], h, mode, derive_seed(model.dropout_seed, dropout_key, 100 + i))
        h, caches[f"block{i + 1}"] = stcnn_block_forward(
            h, model.blocks[i], cfg.pool, mode, derive_seed(model.dropout_seed, dropout_key, i))
    block_shape = h.shape
    n, c, t, hh, ww = h.shape
    seq = np.ascontiguousarray(h.transpose(0, 2, 1, 3, 4)).reshape(n, t, c * hh * ww)
    gru_caches = []
    for f, b in model.grus:
        seq, gc = bigru_forward(seq, f, b)
        gru_caches.append(gc)
    logits = seq @ model.out_w + model.out_b
    log_probs = log_softmax(logits, axis=-1)
    caches.update(block_shape=block_shape, grus=gru_caches, head_in=seq, log_probs=log_probs)
    return log_probs, caches


def fpa_input(model: LipNet, video: np.ndarray, position: str) -> np.ndarray:
    """The eval-mode tensor the FPA at ``position`` sees (before that FPA runs)."""
    if position not in model.fpas:
        raise ArgumentError(f"model has no FPA at position {position!r}; present: {', '.join(model.fpas) or 'none'}")
    h = video
    for i, pos in enumerate(POSITIONS):
        if pos == position:
            return h
        if pos in model.fpas:
            h, _ = fpa_forward(model.fpas[pos], h, "eval")
        h, _ = stcnn_block_forward(h, model.blocks[i], model.config.pool, "eval", 0)
    raise AssertionError("unreachable")


def lipnet_backward(model: LipNet, cache: dict, grad_log_probs=None, grad_logits=None) -> dict:
    """Gradients of every named parameter.

    Pass ``grad_logits`` (e.g. straight from the CTC loss) to skip the
    log-softmax backward, or ``grad_log_probs`` otherwise.
    """
    if grad_logits is None:
        grad_logits = log_softmax_backward(cache["log_probs"], grad_log_probs, axis=-1)
    grads: dict = {}
    head_in = cache["head_in"]
    grads["out.weight"] = head_in.reshape(-1, head_in.shape[2]).T @ grad_logits.reshape(-1, grad_logits.shape[2])
    grads["out.bias"] = grad_logits.sum(axis=(0, 1))
    g = grad_logits @ model.out_w.T
    for i in range(len(model.grus) - 1, -1, -1):
        f, b = model.grus[i]
        g, gf, gb = bigru_backward(cache["grus"][i], f, b, g)
        for k, v in gf.items():
            grads[f"gru{i + 1}.fwd.{k}"] = v
        for k, v in gb.items():
            grads[f"gru{i + 1}.bwd.{k}"] = v
    n, c, t, hh, ww = cache["block_shape"]
    g = np.ascontiguousarray(g.reshape(n, t, c, hh, ww).transpose(0, 2, 1, 3, 4))
    for i in range(2, -1, -1):
        pos = POSITIONS[i]
        need_input = i > 0 or pos in model.fpas
        g = stcnn_block_backward(model.blocks[i], cache[f"block{i + 1}"], g, grads, f"block{i + 1}", need_input)
        if pos in model.fpas:
            g, fg = fpa_backward(model.fpas[pos], cache[pos], g)
            for k, v in fg.items():
                grads[f"fpa.{pos}.{k}"] = v
    return {name: grads[name] for name, _ in model.named_parameters()}
