"""The finite-difference gradient suite run by ``fpa3d gradcheck``.

Every case builds float64 inputs from a seed, wires the forward and backward
functions into :func:`fpa3d.kernels.gradcheck`, and returns its report.
"""
from __future__ import annotations

import warnings

import numpy as np

from .ctc import ctc_loss_grad
from .fpa import FpaConfig, fpa_backward, fpa_build, fpa_forward
from .kernels import (
    BatchNormState,
    Conv3dParams,
    GradReport,
    activation,
    activation_backward,
    batchnorm3d,
    batchnorm3d_backward,
    conv3d,
    conv3d_backward,
    gradcheck,
    log_softmax,
    maxpool3d,
    maxpool3d_backward,
    resize_to,
    resize_to_backward,
)
from .model.gru import GruParams, bigru_backward, bigru_forward
from .model.lipnet import LipNetConfig, build_lipnet, lipnet_backward, lipnet_forward

KERNEL_TOL = 1e-4
MODEL_TOL = 1e-3

# (x shape, c_out, kernel, stride) -- odd extents included on purpose.
CONV_CASES = [
    ((1, 2, 3, 4, 4), 3, (3, 3, 3), (1, 1, 1)),
    ((2, 1, 5, 7, 6), 2, (3, 3, 3), (2, 2, 2)),
    ((1, 3, 4, 5, 9), 2, (1, 3, 3), (1, 2, 2)),
    ((1, 2, 7, 9, 9), 1, (3, 5, 5), (1, 2, 2)),
    ((2, 2, 1, 3, 5), 2, (1, 1, 1), (1, 1, 1)),
]
POOL_CASES = [
    ((1, 1, 2, 4, 4), (1, 2, 2), (1, 2, 2)),
    ((1, 2, 3, 5, 7), (1, 2, 2), (1, 2, 2)),
    ((2, 1, 4, 5, 5), (2, 2, 2), (1, 1, 1)),
    ((1, 2, 5, 7, 6), (3, 3, 3), (2, 2, 2)),
    ((1, 1, 3, 9, 3), (1, 3, 1), (1, 2, 1)),
]
NORM_SHAPES = [(2, 3, 2, 3, 3), (1, 2, 3, 5, 7), (3, 1, 1, 2, 2), (1, 4, 5, 3, 3), (2, 2, 3, 3, 1)]
RESIZE_CASES = [
    ((1, 1, 2, 2, 2), (3, 3, 3)),
    ((1, 2, 3, 4, 5), (5, 7, 9)),
    ((2, 1, 4, 3, 3), (8, 6, 5)),
    ((1, 1, 1, 1, 3), (2, 4, 5)),
    ((1, 2, 2, 5, 2), (4, 9, 4)),
]


def _rng(seed, *salt):
    return np.random.default_rng([seed, *salt])


def check_conv3d(seed=0) -> list[GradReport]:
    reports = []
    for i, (shape, c_out, kernel, stride) in enumerate(CONV_CASES):
        rng = _rng(seed, 1, i)
        x = rng.standard_normal(shape)
        p = Conv3dParams.init(c_out, shape[1], kernel, stride=stride, rng=rng, dtype=np.float64)
        p.bias[...] = rng.standard_normal(c_out)

        def fwd(x=x, p=p):
            return conv3d(x, p, return_cache=True)

        def bwd(cache, g, p=p):
            gx, gw, gb = conv3d_backward(cache, p, g)
            return {"x": gx, "weight": gw, "bias": gb}

        reports.append(gradcheck(fwd, bwd, {"x": x, "weight": p.weight, "bias": p.bias},
                                 name=f"conv3d[{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_maxpool3d(seed=0) -> list[GradReport]:
    reports = []
    for i, (shape, window, stride) in enumerate(POOL_CASES):
        # A permutation scaled by 0.1 keeps every gap far above the FD step: no ties.
        x = _rng(seed, 2, i).permutation(int(np.prod(shape))).reshape(shape) * 0.1

        def fwd(x=x, window=window, stride=stride):
            out, idx = maxpool3d(x, window, stride)
            return out, idx

        def bwd(idx, g, x=x):
            return {"x": maxpool3d_backward(idx, g, x.shape)}

        reports.append(gradcheck(fwd, bwd, {"x": x}, name=f"maxpool3d[{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_batchnorm3d(seed=0) -> list[GradReport]:
    reports = []
    for mode in ("train", "eval"):
        for i, shape in enumerate(NORM_SHAPES):
            rng = _rng(seed, 3, i)
            x = rng.standard_normal(shape) * 2 + 0.5
            c = shape[1]
            s = BatchNormState(rng.uniform(0.5, 1.5, c), rng.standard_normal(c),
                               rng.standard_normal(c), rng.uniform(0.5, 2.0, c), mode=mode)

            def fwd(x=x, s=s):
                y, _, cache = batchnorm3d(x, s)
                return y, cache

            def bwd(cache, g):
                gx, gg, gb = batchnorm3d_backward(cache, g)
                return {"x": gx, "gamma": gg, "beta": gb}

            reports.append(gradcheck(fwd, bwd, {"x": x, "gamma": s.gamma, "beta": s.beta},
                                     name=f"batchnorm3d[{mode},{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_activations(seed=0) -> list[GradReport]:
    reports = []
    for kind in ("relu", "sigmoid", "tanh", "softmax_over_channels"):
        for i, shape in enumerate(NORM_SHAPES):
            x = _rng(seed, 4, i).standard_normal(shape)
            if kind == "relu":
                x = np.where(np.abs(x) < 1e-2, 0.5, x)  # stay off the kink

            def fwd(x=x, kind=kind):
                y = activation(x, kind)
                return y, y

            def bwd(y, g, x=x, kind=kind):
                return {"x": activation_backward(kind, x, y, g)}

            reports.append(gradcheck(fwd, bwd, {"x": x}, name=f"{kind}[{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_resize(seed=0) -> list[GradReport]:
    reports = []
    for i, (shape, target) in enumerate(RESIZE_CASES):
        x = _rng(seed, 5, i).standard_normal(shape)

        def fwd(x=x, target=target):
            return resize_to(x, *target), None

        def bwd(_, g, x=x):
            return {"x": resize_to_backward(g, x.shape[2:])}

        reports.append(gradcheck(fwd, bwd, {"x": x}, name=f"upsample[{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_bigru(seed=0) -> list[GradReport]:
    reports = []
    for i, (n, t, d, hidden) in enumerate([(1, 3, 2, 2), (2, 5, 3, 4), (1, 1, 4, 3), (3, 4, 2, 5), (2, 7, 5, 2)]):
        rng = _rng(seed, 6, i)
        x = rng.standard_normal((n, t, d))
        fwd_p, bwd_p = GruParams.init(d, hidden, rng, np.float64), GruParams.init(d, hidden, rng, np.float64)
        fwd_p.b[...] = rng.standard_normal(3 * hidden) * 0.3
        bwd_p.b[...] = rng.standard_normal(3 * hidden) * 0.3

        def fwd(x=x, f=fwd_p, b=bwd_p):
            return bigru_forward(x, f, b)

        def bwd(cache, g, f=fwd_p, b=bwd_p):
            gx, gf, gb = bigru_backward(cache, f, b, g)
            return {"x": gx, **{f"fwd.{k}": v for k, v in gf.items()}, **{f"bwd.{k}": v for k, v in gb.items()}}

        inputs = {"x": x, **{f"fwd.{k}": v for k, v in vars(fwd_p).items()},
                  **{f"bwd.{k}": v for k, v in vars(bwd_p).items()}}
        reports.append(gradcheck(fwd, bwd, inputs, name=f"bigru[{i}]", seed=seed, tol=KERNEL_TOL))
    return reports


def check_fpa(seed=0, max_checks=40) -> list[GradReport]:
    reports = []
    for variant in ("2d", "3d"):
        for mode in ("train", "eval"):
            m = fpa_build(FpaConfig(variant), 2, init_seed=seed, dtype=np.float64)
            rng = _rng(seed, 7)
            for _, buf in m.named_buffers():
                buf[...] = rng.uniform(0.5, 1.5, buf.shape)
            x = rng.standard_normal((1, 2, 8, 12, 12))

            def fwd(m=m, x=x, mode=mode):
                return fpa_forward(m, x, mode, dropout_key=seed)

            def bwd(cache, g, m=m):
                gx, gp = fpa_backward(m, cache, g)
                return {"x": gx, **gp}

            reports.append(gradcheck(fwd, bwd, {"x": x, **dict(m.named_parameters())},
                                     name=f"fpa_{variant}[{mode}]", seed=seed, tol=KERNEL_TOL, max_checks=max_checks))
    return reports


def tiny_lipnet_config(**overrides) -> LipNetConfig:
    """t=6, 12x12 video, hidden 4: small enough to difference every block."""
    kw = dict(t=6, h=12, w=12, channels=(2, 3, 4), conv1_stride=(1, 1, 1), hidden=4,
              fpa={"input": FpaConfig("2d"), "f1": FpaConfig("3d"), "f2": FpaConfig("3d")})
    kw.update(overrides)
    return LipNetConfig(**kw)


def check_lipnet(seed=0, max_checks=12) -> list[GradReport]:
    model = build_lipnet(tiny_lipnet_config(), seed=seed, dtype=np.float64)
    x = _rng(seed, 8).uniform(0, 1, (2, 1, 6, 12, 12))

    def fwd():
        return lipnet_forward(model, x, "train", dropout_key=seed)

    def bwd(cache, g):
        return lipnet_backward(model, cache, grad_log_probs=g)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [gradcheck(fwd, bwd, dict(model.named_parameters()), name="lipnet", seed=seed,
                          tol=MODEL_TOL, max_checks=max_checks)]


def check_ctc(seed=0) -> list[GradReport]:
    rng = _rng(seed, 9)
    z = rng.standard_normal((4, 3))

    def fwd():
        loss, grad = ctc_loss_grad(log_softmax(z, axis=1), [0, 1])
        return np.array([loss]), grad

    def bwd(grad, g):
        return {"logits": grad * g[0]}

    return [gradcheck(fwd, bwd, {"logits": z}, name="ctc", seed=seed, tol=1e-6)]


SUITE = {
    "conv3d": check_conv3d,
    "maxpool3d": check_maxpool3d,
    "batchnorm3d": check_batchnorm3d,
    "activations": check_activations,
    "upsample": check_resize,
    "bigru": check_bigru,
    "fpa": check_fpa,
    "lipnet": check_lipnet,
    "ctc": check_ctc,
}


def gradient_suite(seed=0, ops=None) -> list[GradReport]:
    reports = []
    for name, fn in SUITE.items():
        if ops is None or name in ops:
            reports.extend(fn(seed))
    return reports
