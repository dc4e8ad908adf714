import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpa3d import checks
from fpa3d.errors import ArgumentError, DegenerateBatchError, ShapeError
from fpa3d.kernels import (
    BatchNormState,
    Conv3dParams,
    activation,
    batchnorm3d,
    conv3d,
    conv3d_backward,
    dropout3d,
    gradcheck,
    maxpool3d,
    maxpool3d_backward,
    upsample_bilinear_spatial,
    upsample_temporal,
)
from fpa3d.parallel import threads


def conv_oracle(x, w, b, stride, pad):
    """Straight nested loops over every output voxel and tap."""
    n, c_in, t, h, wd = x.shape
    c_out, _, kt, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad[0],) * 2, (pad[1],) * 2, (pad[2],) * 2))
    to = (t + 2 * pad[0] - kt) // stride[0] + 1
    ho = (h + 2 * pad[1] - kh) // stride[1] + 1
    wo = (wd + 2 * pad[2] - kw) // stride[2] + 1
    out = np.zeros((n, c_out, to, ho, wo))
    for i, o, a, bb, cc in itertools.product(range(n), range(c_out), range(to), range(ho), range(wo)):
        acc = b[o]
        for ci, dt, dh, dw in itertools.product(range(c_in), range(kt), range(kh), range(kw)):
            acc += w[o, ci, dt, dh, dw] * xp[i, ci, a * stride[0] + dt, bb * stride[1] + dh, cc * stride[2] + dw]
        out[i, o, a, bb, cc] = acc
    return out


def make_conv(c_out, c_in, kernel, stride=1, padding=0, seed=0):
    rng = np.random.default_rng(seed)
    p = Conv3dParams.init(c_out, c_in, kernel, stride, padding, rng=rng, dtype=np.float64)
    p.bias[...] = rng.standard_normal(c_out)
    return p


# -- conv3d ---------------------------------------------------------------

def test_conv_identity_and_zero_kernels():
    x = np.random.default_rng(0).standard_normal((2, 1, 3, 4, 5))
    p = Conv3dParams(np.ones((1, 1, 1, 1, 1)), np.zeros(1))
    assert np.array_equal(conv3d(x, p), x)
    g = np.random.default_rng(1).standard_normal(x.shape)
    gx, _, _ = conv3d_backward(x, p, g)
    assert np.array_equal(gx, g)
    z = Conv3dParams(np.zeros((2, 1, 3, 3, 3)), np.array([1.5, -2.0]), padding=1)
    y = conv3d(x, z)
    assert (y[:, 0] == 1.5).all() and (y[:, 1] == -2.0).all()


def test_conv_sum_of_ramp():
    # Even kernels are outside the layer contract, so the 2x2x2 all-ones
    # example is run through the oracle and through a padded 3x3x3 kernel.
    x = np.arange(1, 9, dtype=np.float64).reshape(1, 1, 2, 2, 2)
    assert conv_oracle(x, np.ones((1, 1, 2, 2, 2)), [0.0], (1, 1, 1), (0, 0, 0)).item() == 36
    w = np.zeros((1, 1, 3, 3, 3))
    w[0, 0, 1:, 1:, 1:] = 1
    y = conv3d(x, Conv3dParams(w, np.zeros(1), padding=1))
    assert y[0, 0, 0, 0, 0] == 36


@pytest.mark.parametrize("seed", range(5))
def test_conv_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(v) for v in rng.integers(1, 6, 5))
    kernel = tuple(int(v) for v in rng.choice([1, 3], 3))
    stride = tuple(int(v) for v in rng.integers(1, 3, 3))
    pad = tuple(k // 2 for k in kernel)
    x = rng.standard_normal(shape)
    p = make_conv(2, shape[1], kernel, stride, pad, seed)
    assert np.allclose(conv3d(x, p), conv_oracle(x, p.weight, p.bias, stride, pad), rtol=0, atol=1e-12)


def test_conv_zero_grad_out():
    x = np.random.default_rng(0).standard_normal((1, 2, 3, 4, 4))
    p = make_conv(3, 2, 3, padding=1)
    gx, gw, gb = conv3d_backward(x, p, np.zeros((1, 3, 3, 4, 4)))
    assert not gx.any() and not gw.any() and not gb.any()


def test_stride2_halves_with_ceil_for_every_extent():
    p = Conv3dParams(np.ones((1, 1, 3, 3, 3)), np.zeros(1), stride=2, padding=1)
    for d in range(1, 65):
        y = conv3d(np.zeros((1, 1, d, d, 1)), p)
        assert y.shape[2:4] == (-(-d // 2),) * 2


def test_conv_rejects_even_kernel_and_channel_mismatch():
    with pytest.raises(ShapeError):
        Conv3dParams(np.ones((1, 1, 2, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv3d(np.zeros((1, 2, 3, 3, 3)), make_conv(1, 1, 3, padding=1))


def test_conv_identical_across_thread_counts():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 3, 5, 9, 7)).astype(np.float32)
    p = Conv3dParams.init(4, 3, (3, 5, 5), stride=(1, 2, 2), rng=rng)
    g = rng.standard_normal(conv3d(x, p).shape).astype(np.float32)
    results = []
    for k in (1, 2, 4):
        with threads(k):
            y = conv3d(x, p)
            results.append([y.tobytes()] + [a.tobytes() for a in conv3d_backward(x, p, g)])
    assert results[0] == results[1] == results[2]


# -- maxpool3d ------------------------------------------------------------

def test_pool_global_max_and_ramp():
    x = np.array([1, 5, 3, 2], np.float64).reshape(1, 1, 1, 2, 2)
    out, _ = maxpool3d(x, (1, 2, 2))
    assert out.item() == 5
    ramp = np.tile(np.arange(16.0).reshape(4, 4), (2, 1, 1)).reshape(1, 1, 2, 4, 4)
    out, _ = maxpool3d(ramp, (1, 2, 2), (1, 2, 2))
    assert out[0, 0, 0].ravel().tolist() == [5, 7, 13, 15]
    assert out[0, 0, 1].ravel().tolist() == [5, 7, 13, 15]


def test_pool_ties_pick_first_index():
    x = np.ones((1, 1, 2, 4, 4))
    out, idx = maxpool3d(x, (2, 2, 2), (2, 2, 2))
    assert (out == 1).all()
    assert idx.ravel().tolist() == [0, 2, 8, 10]


def test_pool_backward_routes_each_value_once():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 2, 2, 4, 6))
    out, idx = maxpool3d(x, (1, 2, 2))
    assert not maxpool3d_backward(idx, np.zeros_like(out), x.shape).any()
    g = rng.standard_normal(out.shape)
    gx = maxpool3d_backward(idx, g, x.shape)
    assert np.count_nonzero(gx) == g.size
    assert sorted(gx[gx != 0]) == sorted(g.ravel())


# -- upsampling -----------------------------------------------------------

def test_bilinear_examples():
    x = np.random.default_rng(0).standard_normal((1, 2, 3, 4, 5))
    assert np.array_equal(upsample_bilinear_spatial(x, 4, 5), x)
    row = np.array([0.0, 2.0]).reshape(1, 1, 1, 1, 2)
    assert upsample_bilinear_spatial(row, 1, 3).ravel().tolist() == [0, 1, 2]
    sq = np.array([[0.0, 2.0], [4.0, 6.0]]).reshape(1, 1, 1, 2, 2)
    assert upsample_bilinear_spatial(sq, 3, 3)[0, 0, 0, 1, 1] == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 12), st.integers(1, 12), st.integers(0, 10**6))
def test_bilinear_is_convex_and_keeps_constants(h, w, h_out, w_out, seed):
    x = np.random.default_rng(seed).standard_normal((1, 2, 2, h, w))
    y = upsample_bilinear_spatial(x, h_out, w_out)
    assert y.shape == (1, 2, 2, h_out, w_out)
    assert y.min() >= x.min() and y.max() <= x.max()
    c = np.full((1, 1, 1, h, w), 0.3)
    assert (upsample_bilinear_spatial(c, h_out, w_out) == 0.3).all()


def test_temporal_examples():
    x = np.array([1.0, 2.0]).reshape(1, 1, 2, 1, 1)
    assert upsample_temporal(x, 4).ravel().tolist() == [1, 1, 2, 2]
    assert upsample_temporal(x, 5).ravel().tolist() == [1, 1, 2, 2, 2]
    assert np.array_equal(upsample_temporal(x, 2), x)
    with pytest.raises(ShapeError):
        upsample_temporal(x, 1)


# -- batch norm, dropout, activations --------------------------------------

def test_batchnorm_train_normalizes():
    x = np.random.default_rng(0).standard_normal((3, 4, 5, 6, 7)) * 3 + 2
    y, state, _ = batchnorm3d(x, BatchNormState.init(4, np.float64))
    mean = y.mean(axis=(0, 2, 3, 4))
    var = y.var(axis=(0, 2, 3, 4))
    assert np.abs(mean).max() < 1e-6 and np.abs(var - 1).max() < 1e-4
    assert state.mode == "train" and not np.array_equal(state.running_mean, np.zeros(4))


def test_batchnorm_zero_gamma_and_eval_example():
    x = np.random.default_rng(1).standard_normal((2, 2, 3, 3, 3))
    s = BatchNormState(np.zeros(2), np.array([0.5, -1.0]), np.zeros(2), np.ones(2))
    y, _, _ = batchnorm3d(x, s)
    assert (y[:, 0] == 0.5).all() and (y[:, 1] == -1.0).all()
    s = BatchNormState(np.ones(1), np.zeros(1), np.full(1, 2.0), np.full(1, 4.0), eps=0.0, mode="eval")
    y, _, _ = batchnorm3d(np.full((1, 1, 2, 2, 2), 4.0), s)
    assert (y == 1.0).all()


def test_batchnorm_needs_two_values_per_channel():
    with pytest.raises(DegenerateBatchError):
        batchnorm3d(np.ones((1, 1, 1, 1, 1)), BatchNormState.init(1))


def test_dropout_examples():
    x = np.random.default_rng(0).standard_normal((1, 2, 3, 4, 5))
    assert np.array_equal(dropout3d(x, 0.0, 1, "train")[0], x)
    assert np.array_equal(dropout3d(x, 0.7, 1, "eval")[0], x)
    y, mask = dropout3d(np.ones((1, 1, 10, 100, 100)), 0.5, 42, "train")
    assert abs(y.mean() - 1.0) < 0.02
    assert set(np.unique(mask)) == {0.0, 2.0}
    assert np.array_equal(dropout3d(x, 0.5, 42, "train")[0], dropout3d(x, 0.5, 42, "train")[0])


def test_activation_examples():
    assert activation(np.zeros(1), "sigmoid")[0] == 0.5
    assert activation(np.array([-1.0, 2.0]), "relu").tolist() == [0, 2]
    sm = activation(np.zeros((1, 2, 1, 1, 1)), "softmax_over_channels")
    assert sm.ravel().tolist() == [0.5, 0.5]
    big = activation(np.array([-1000.0, 1000.0]), "sigmoid")
    assert big.tolist() == [0.0, 1.0]


# -- gradient checks --------------------------------------------------------

def test_gradcheck_identity_kernel_is_exact():
    x = np.random.default_rng(0).standard_normal((1, 1, 2, 3, 3))
    p = Conv3dParams(np.ones((1, 1, 1, 1, 1)), np.zeros(1))

    def fwd():
        return conv3d(x, p, return_cache=True)

    def bwd(cache, g):
        return {"x": conv3d_backward(cache, p, g)[0]}

    assert gradcheck(fwd, bwd, {"x": x}).max_rel_err < 1e-10


def test_gradcheck_sigmoid_tight():
    x = np.random.default_rng(2).standard_normal((1, 2, 2, 3, 3))

    def fwd():
        y = activation(x, "sigmoid")
        return y, y

    def bwd(y, g):
        return {"x": g * y * (1 - y)}

    assert gradcheck(fwd, bwd, {"x": x}).max_rel_err < 1e-6


def test_gradcheck_flags_a_wrong_gradient():
    x = np.random.default_rng(0).standard_normal((1, 1, 2, 2, 2))

    def fwd():
        return x**2, None

    def bwd(_, g):
        return {"x": g * x}  # missing the factor 2

    report = gradcheck(fwd, bwd, {"x": x})
    assert not report.passed and report.lines()[0].endswith("FAIL")


def test_gradcheck_requires_float64():
    x = np.zeros((1, 1, 1, 1, 2), np.float32)
    with pytest.raises(ArgumentError):
        gradcheck(lambda: (x, None), lambda c, g: {"x": g}, {"x": x})


@pytest.mark.parametrize("suite", ["conv3d", "maxpool3d", "batchnorm3d", "activations", "upsample"])
def test_kernel_gradients_on_five_shapes(suite):
    reports = checks.SUITE[suite](seed=11)
    assert len(reports) >= 5
    for r in reports:
        assert r.passed, "\n".join(r.lines())
