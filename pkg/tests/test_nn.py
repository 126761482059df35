import numpy as np
import pytest

from comfortgan import autodiff as ad
from comfortgan import encode as enc
from comfortgan.nn import DiscriminatorNet, GeneratorNet, check_wiring, glorot, output_activations


def _nets(latent, features, labels):
    g = GeneratorNet(latent, labels, features, ((0, features, "tanh"),))
    d = DiscriminatorNet(features, labels)
    return g, d


# Counted by hand: fixed generator body 76256 weights+biases plus 2*608 batchnorm,
# first layer (latent+labels)*128+128, last layer 33*features; critic body 19201
# plus (features+labels)*64+64.
@pytest.mark.parametrize(
    "latent, features, labels, g_count, d_count",
    [(20, 8, 7, 81320, 20225), (80, 12, 7, 89132, 20481), (100, 16, 7, 91824, 20737)],
)
def test_parameter_counts(latent, features, labels, g_count, d_count):
    g, d = _nets(latent, features, labels)
    assert g.n_params() == g_count
    assert d.n_params() == d_count
    assert sum(v.size for v in g.init(0).values()) == g_count
    assert sum(v.size for v in d.init(0).values()) == d_count


def test_layer_widths():
    g, d = _nets(20, 8, 3)
    assert g.widths == [23, 128, 256, 128, 64, 32, 8]
    assert d.widths == [11, 64, 128, 64, 32, 16, 1]
    check_wiring(g, d)
    with pytest.raises(ValueError):
        check_wiring(g, DiscriminatorNet(9, 3))


def test_init_deterministic_and_zero_bias():
    g, _ = _nets(20, 8, 3)
    a, b = g.init(4), g.init(4)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert all(not a[k].any() for k in a if k.startswith("b") or k.startswith("beta"))
    assert not np.array_equal(a["W0"], g.init(5)["W0"])


def test_glorot_mean_within_three_sigma():
    w = glorot(np.random.default_rng(0), 100, 100)
    limit = np.sqrt(6 / 200)
    sigma = limit / np.sqrt(3) / np.sqrt(w.size)
    assert abs(w.mean()) < 3 * sigma
    assert np.abs(w).max() <= limit


def test_generator_output_ranges(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    g = GeneratorNet.for_codec(codec, 20)
    params = g.init(0)
    rng = np.random.default_rng(0)
    z = rng.standard_normal((128, 20))
    y = np.eye(codec.n_classes)[rng.integers(codec.n_classes, size=128)]
    out = g.forward(params, z, y, train=True).value
    assert out.shape == (128, codec.width)
    for start, stop, kind in output_activations(codec):
        block = out[:, start:stop]
        if kind == "tanh":
            assert (np.abs(block) < 1).all()
        else:
            np.testing.assert_allclose(block.sum(axis=1), 1.0, atol=1e-9)
    with pytest.raises(ValueError, match="latent"):
        g.forward(params, z[:, :5], y, train=True)


def test_activation_segments(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    # temp | sex(2) | hour(sin, cos) | rh: hour and rh are adjacent tanh slots
    assert output_activations(codec) == ((0, 1, "tanh"), (1, 3, "softmax"), (3, 6, "tanh"))


def test_generator_eval_uses_running_stats():
    g, _ = _nets(4, 3, 2)
    params, state = g.init(0), g.init_state()
    rng = np.random.default_rng(1)
    z, y = rng.standard_normal((16, 4)), np.eye(2)[rng.integers(2, size=16)]
    a = g.forward(params, z, y, train=False, state=state).value
    b = g.forward(params, z[:1], y[:1], train=False, state=state).value
    np.testing.assert_allclose(a[:1], b)
    before = state["bn0"]["mean"].copy()
    g.forward(params, z, y, train=True, state=state)
    assert not np.array_equal(before, state["bn0"]["mean"])


def test_critic_modes():
    _, d = _nets(4, 3, 2)
    params = d.init(0)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((10, 3)), np.eye(2)[rng.integers(2, size=10)]
    e1 = d.forward(params, x, y, train=False).value
    e2 = d.forward(params, x, y, train=False).value
    assert e1.shape == (10, 1) and np.array_equal(e1, e2)
    t1 = d.forward(params, x, y, train=True, rng=np.random.default_rng(9)).value
    t2 = d.forward(params, x, y, train=True, rng=np.random.default_rng(9)).value
    assert np.array_equal(t1, t2) and not np.array_equal(t1, e1)
    zero = {k: np.zeros_like(v) for k, v in params.items()}
    assert not d.forward(zero, x, y, train=False).value.any()


def test_gradient_reaches_every_parameter(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    g = GeneratorNet.for_codec(codec, 8)
    d = DiscriminatorNet(codec.width, codec.n_classes)
    gp, dp = ad.leaves_from(g.init(0)), ad.leaves_from(d.init(1))
    rng = np.random.default_rng(3)
    z = rng.standard_normal((64, 8))
    y = np.eye(codec.n_classes)[rng.integers(codec.n_classes, size=64)]
    fake = g.forward(gp, z, y, train=True)
    score = ad.mean(d.forward(dp, fake, y, train=True, rng=rng))
    names = list(gp) + list(dp)
    grads = ad.grad(score, [gp[k] for k in gp] + [dp[k] for k in dp])
    for name, gr in zip(names, grads):
        assert np.abs(gr.value).sum() > 0, name
