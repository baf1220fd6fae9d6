"""Analytic backprop gradients against central finite differences."""

import numpy as np
import pytest

from slris import neuralnet as nn
from slris.dataset import build_dataset

REL_TOL = 1e-4
H_STEP = 1e-5
# a +-1e-5 weight step moves pre-activations by ~1e-5 * |input|; keep every
# ReLU input at least this far from zero so the finite difference is smooth
KINK_MARGIN = 1e-3


def finite_difference(model, x, y, name, index, h=H_STEP):
    p = model.params[name]
    orig = p[index]
    p[index] = orig + h
    up = nn.cross_entropy_logits(nn.forward_logits(model, x), y)
    p[index] = orig - h
    down = nn.cross_entropy_logits(nn.forward_logits(model, x), y)
    p[index] = orig
    return (up - down) / (2 * h)


@pytest.fixture(scope="module")
def tiny_batch():
    ds = build_dataset(2, 32, (0.0, 20.0), seed=5)
    return nn.iq_to_channels(ds.iq), ds.labels.astype(int)


def tiny_model(seed):
    model = nn.init_model(32, seed=seed, F1=2, F2=2, H=4)
    # nonzero biases so the bias gradients are exercised away from the init point
    rng = np.random.default_rng(seed)
    for name in nn.PARAM_ORDER:
        if name.endswith("_b"):
            model.params[name] += 0.1 * rng.standard_normal(model.params[name].shape)
    return model


def min_relu_margin(model, x):
    _, cache = nn._forward(model, x)
    z1, z2, z3 = cache[2], cache[5], cache[7]
    return min(np.abs(z1).min(), np.abs(z2).min(), np.abs(z3).min())


@pytest.mark.parametrize("seed", [0, 2, 4, 5])
def test_every_parameter_matches_finite_differences(tiny_batch, seed):
    x, y = tiny_batch
    model = tiny_model(seed)
    assert min_relu_margin(model, x) > KINK_MARGIN
    _, grads = nn.backward(model, x, y)
    worst = 0.0
    for name in nn.PARAM_ORDER:
        for index in np.ndindex(model.params[name].shape):
            g = grads[name][index]
            fd = finite_difference(model, x, y, name, index)
            rel = abs(g - fd) / (abs(g) + 1e-8)
            worst = max(worst, rel)
            assert rel < REL_TOL, f"{name}{index}: analytic {g:.3e} vs numeric {fd:.3e}"
    print(f"worst relative gradient error: {worst:.2e} over {model.n_params} parameters")


def test_kink_crossing_is_a_finite_difference_artifact(tiny_batch):
    # seed 1 has a conv2 pre-activation ~2e-5 from zero: h=1e-5 straddles the
    # kink, a smaller step recovers the analytic value
    x, y = tiny_batch
    model = tiny_model(1)
    assert min_relu_margin(model, x) < 1e-4
    _, grads = nn.backward(model, x, y)
    g = grads["conv2_w"][0, 0, 1]
    assert abs(finite_difference(model, x, y, "conv2_w", (0, 0, 1), h=1e-7) - g) / abs(g) < 1e-6


def test_gradient_shapes(tiny_batch):
    x, y = tiny_batch
    model = nn.init_model(32, seed=0, F1=2, F2=2, H=4)
    _, grads = nn.backward(model, x, y)
    assert {k: v.shape for k, v in grads.items()} == {k: v.shape for k, v in model.params.items()}


def test_duplicated_batch_gives_same_mean_gradient(tiny_batch):
    x, y = tiny_batch
    model = nn.init_model(32, seed=2, F1=2, F2=2, H=4)
    _, g1 = nn.backward(model, x, y)
    _, g2 = nn.backward(model, np.concatenate([x, x]), np.concatenate([y, y]))
    for name in nn.PARAM_ORDER:
        np.testing.assert_allclose(g2[name], g1[name], rtol=0, atol=1e-12)


def test_gradient_vanishes_at_confident_correct_output(tiny_batch):
    x, y = tiny_batch
    model = nn.zero_model(32, F1=2, F2=2, H=4)
    model.params["out_b"][:] = -1e3
    model.params["out_b"][2] = 1e3
    _, grads = nn.backward(model, x[y == 2], y[y == 2])
    for g in grads.values():
        assert np.all(np.abs(g) < 1e-12)


def test_nan_input_is_rejected(tiny_batch):
    x, y = tiny_batch
    model = nn.init_model(32, seed=0, F1=2, F2=2, H=4)
    bad = x.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        nn.backward(model, bad, y)
