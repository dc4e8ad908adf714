import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpa3d import checks
from fpa3d.ctc import Alphabet
from fpa3d.errors import NumericError, ShapeError
from fpa3d.fpa import FpaConfig
from fpa3d.kernels import BatchNormState, Conv3dParams
from fpa3d.layers import ConvUnit
from fpa3d.model import (
    AdamState,
    GruParams,
    LipNetConfig,
    Sample,
    TrainConfig,
    adam_step,
    bigru_forward,
    build_lipnet,
    dataset_loss,
    gru_forward,
    lipnet_forward,
    stcnn_block_forward,
    train_epoch,
)
from fpa3d.parallel import threads


def gru_trace(x, wx, wh, b):
    """One sequence, scalar arithmetic only, gates in (z, r, c) column blocks."""
    hd = len(wh)
    h = [0.0] * hd
    out = []
    for xt in x:
        pre = [b[j] + sum(xt[i] * wx[i][j] for i in range(len(xt))) for j in range(3 * hd)]
        z = [1 / (1 + math.exp(-(pre[k] + sum(h[i] * wh[i][k] for i in range(hd))))) for k in range(hd)]
        r = [1 / (1 + math.exp(-(pre[hd + k] + sum(h[i] * wh[i][hd + k] for i in range(hd))))) for k in range(hd)]
        c = [math.tanh(pre[2 * hd + k] + sum(r[i] * h[i] * wh[i][2 * hd + k] for i in range(hd))) for k in range(hd)]
        h = [(1 - z[k]) * h[k] + z[k] * c[k] for k in range(hd)]
        out.append(h)
    return np.array(out)


def test_gru_matches_scalar_trace():
    rng = np.random.default_rng(0)
    p = GruParams.init(2, 2, rng, np.float64)
    p.b[...] = rng.standard_normal(6)
    x = rng.standard_normal((1, 3, 2))
    hs, _ = gru_forward(x, p)
    oracle = gru_trace(x[0].tolist(), p.wx.tolist(), p.wh.tolist(), p.b.tolist())
    assert np.abs(hs[0] - oracle).max() < 1e-12


def test_gru_zero_weights_stay_at_zero():
    p = GruParams(np.zeros((3, 12)), np.zeros((4, 12)), np.zeros(12))
    hs, (_, steps) = gru_forward(np.random.default_rng(0).standard_normal((2, 5, 3)), p)
    assert not hs.any()
    assert all((z == 0.5).all() and not c.any() for _, z, _, _, c in steps)


def test_bigru_single_step_is_symmetric():
    rng = np.random.default_rng(1)
    p = GruParams.init(3, 4, rng, np.float64)
    out, _ = bigru_forward(rng.standard_normal((2, 1, 3)), p, p)
    assert np.array_equal(out[..., :4], out[..., 4:])


def small_config(**kw):
    base = dict(t=8, h=16, w=16, channels=(2, 3, 4), hidden=6)
    base.update(kw)
    return LipNetConfig(**base)


def test_block_examples():
    x = np.random.default_rng(0).standard_normal((1, 1, 5, 32, 32)).astype(np.float32)
    conv = Conv3dParams.init(4, 1, (3, 5, 5), padding=(1, 2, 2), rng=0)
    y, _ = stcnn_block_forward(x, ConvUnit(conv, BatchNormState.init(4), dropout=0.3), (1, 2, 2), "eval", 0)
    assert y.shape == (1, 4, 5, 16, 16)
    conv.weight[...] = 0
    y, _ = stcnn_block_forward(x, ConvUnit(conv, BatchNormState.init(4)), (1, 2, 2), "train", 0)
    assert not y.any()


def test_default_block_extents():
    assert LipNetConfig().block_extents() == [(24, 8, 8), (24, 4, 4), (24, 2, 2)]


def test_log_probs_normalized_and_fpa_keeps_shape():
    video = np.random.default_rng(0).uniform(0, 1, (2, 1, 8, 16, 16)).astype(np.float32)
    plain, _ = lipnet_forward(build_lipnet(small_config()), video, "eval")
    fpa = {"input": FpaConfig("2d"), "f1": FpaConfig("3d"), "f2": FpaConfig("3d")}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full, _ = lipnet_forward(build_lipnet(small_config(fpa=fpa)), video, "train", 3)
    assert plain.shape == full.shape == (2, 8, 28)
    for lp in (plain, full):
        assert np.abs(np.exp(lp.astype(np.float64)).sum(-1) - 1).max() < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(4, 32))
def test_time_length_preserved(t):
    model = build_lipnet(small_config(t=t, hidden=3), seed=t)
    out, _ = lipnet_forward(model, np.zeros((1, 1, t, 16, 16), np.float32), "eval")
    assert out.shape == (1, t, 28)


def test_forward_rejects_wrong_video_shape():
    with pytest.raises(ShapeError):
        lipnet_forward(build_lipnet(small_config()), np.zeros((1, 1, 9, 16, 16), np.float32))


def test_full_model_gradient():
    for report in checks.check_lipnet(seed=1):
        assert report.passed, "\n".join(report.lines())


# -- Adam -------------------------------------------------------------------

def test_adam_zero_gradient_is_a_no_op():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState())
    assert p["w"].tolist() == [1.0, -2.0]


def test_adam_first_step_moves_by_lr():
    p = {"w": np.array([0.3])}
    adam_step(p, {"w": np.array([2.5])}, AdamState(), lr=1e-4)
    assert abs((p["w"][0] - 0.3) + 1e-4) < 1e-11


def test_adam_descends_a_quadratic():
    p = {"w": np.array([3.0])}
    s = AdamState()
    losses = [p["w"][0] ** 2]
    for _ in range(2):
        adam_step(p, {"w": 2 * p["w"]}, s, lr=0.1)
        losses.append(p["w"][0] ** 2)
    assert losses[0] > losses[1] > losses[2]


def test_adam_rejects_non_finite_without_touching_state():
    p = {"a": np.ones(2), "b": np.ones(2)}
    s = AdamState()
    with pytest.raises(NumericError):
        adam_step(p, {"a": np.ones(2), "b": np.array([1.0, np.nan])}, s)
    assert s.step == 0 and not s.m and p["a"].tolist() == [1.0, 1.0]


# -- training -----------------------------------------------------------------

def toy_dataset(n=6, t=8, seed=0):
    rng = np.random.default_rng(seed)
    alphabet = Alphabet()
    words = ["ab", "ba", "c"]
    return [Sample(rng.uniform(0, 1, (1, t, 16, 16)).astype(np.float32), alphabet.encode(words[i % 3]))
            for i in range(n)]


def params_bytes(model):
    return [p.tobytes() for _, p in model.named_parameters()] + [b.tobytes() for _, b in model.named_buffers()]


def run_training(n_threads=1, lr=1e-3, epochs=2, fpa=None):
    data = toy_dataset()
    model = build_lipnet(small_config(fpa=fpa or {}), seed=4)
    adam = AdamState()
    cfg = TrainConfig(batch_size=4, lr=lr, seed=9)
    with threads(n_threads), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        losses = [train_epoch(data, model, adam, cfg, e) for e in range(epochs)]
    return model, losses


def test_training_is_bit_reproducible_across_runs_and_threads():
    fpa = {"f1": FpaConfig("3d")}
    m1, l1 = run_training(1, fpa=fpa)
    m2, l2 = run_training(1, fpa=fpa)
    m4, l4 = run_training(4, fpa=fpa)
    assert l1 == l2 == l4
    assert params_bytes(m1) == params_bytes(m2) == params_bytes(m4)


def test_zero_learning_rate_keeps_parameters():
    # No dropout and a single batch, so the training pass sees exactly what
    # a train-mode evaluation pass sees.
    data = toy_dataset()
    model = build_lipnet(small_config(dropout=0.0), seed=4)
    before = [p.copy() for _, p in model.named_parameters()]
    loss = train_epoch(data, model, AdamState(), TrainConfig(batch_size=len(data), lr=0.0), 0)
    assert all(np.array_equal(a, p) for a, (_, p) in zip(before, model.named_parameters()))
    assert loss == pytest.approx(dataset_loss(data, model, len(data), mode="train"), rel=1e-6)


def test_training_reduces_loss():
    _, losses = run_training(lr=3e-3, epochs=6)
    assert losses[-1] < losses[0]
