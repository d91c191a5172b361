import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import correlate

from quadenhance.nn import layers as L


def conv_oracle(x, w, b, stride, pad):
    """Direct cross-correlation per (sample, out channel) with scipy."""
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, cout = x.shape[0], w.shape[0]
    outs = []
    for i in range(n):
        maps = [correlate(xp[i], w[o], mode="valid")[0] + b[o] for o in range(cout)]
        outs.append(np.stack(maps)[:, ::stride, ::stride])
    return np.stack(outs)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(1, 2), st.integers(0, 2),
       st.integers(0, 2**31))
def test_conv_matches_scipy(cin, cout, k, s, p, seed):
    rng = np.random.default_rng(seed)
    size = k + 3
    spec = L.conv2d(cin, cout, k, s, p)
    x = rng.standard_normal((2, cin, size, size + 1))
    params = {"weight": rng.standard_normal((cout, cin, k, k)), "bias": rng.standard_normal(cout)}
    y, _ = L.conv2d_forward(x, params, spec)
    np.testing.assert_allclose(y, conv_oracle(x, params["weight"], params["bias"], s, p), atol=1e-10)


def test_conv_rejects_wrong_channels(rng):
    spec = L.conv2d(3, 2)
    with pytest.raises(ValueError):
        L.conv2d_forward(rng.standard_normal((1, 2, 5, 5)), L.init_params(spec, rng), spec)


def test_batchnorm_train_normalises(rng):
    spec = L.batchnorm(3)
    x = rng.standard_normal((8, 3, 4, 4)) * 5 + 2
    buf = L.init_buffers(spec)
    y, _ = L.batchnorm_forward(x, L.init_params(spec, rng), buf, spec, True, True)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-4)
    m = 8 * 16
    np.testing.assert_allclose(buf["running_mean"], 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(buf["running_var"], 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))


def test_batchnorm_eval_uses_running_stats(rng):
    spec = L.batchnorm(2)
    buf = {"running_mean": np.array([1.0, -1.0]), "running_var": np.array([4.0, 0.25])}
    params = {"gamma": np.array([2.0, 1.0]), "beta": np.array([0.0, 3.0])}
    x = rng.standard_normal((5, 2))
    before = {k: v.copy() for k, v in buf.items()}
    y, _ = L.batchnorm_forward(x, params, buf, spec, False, False)
    expected = (x - [1, -1]) / np.sqrt(np.array([4.0, 0.25]) + L.BN_EPS) * [2, 1] + [0, 3]
    np.testing.assert_allclose(y, expected)
    for k in buf:
        np.testing.assert_array_equal(buf[k], before[k])


def test_leaky_relu(rng):
    y, _ = L.leaky_relu_forward(np.array([-2.0, 0.0, 3.0]), L.leaky_relu(0.2))
    np.testing.assert_allclose(y, [-0.4, 0.0, 3.0])


def test_dropout_inverted_scaling(rng):
    x = np.ones((200, 50))
    y, mask = L.dropout_forward(x, L.dropout(0.25), active=True, rng=rng)
    assert set(np.unique(y)) <= {0.0, 1 / 0.75}
    assert abs(y.mean() - 1.0) < 0.02
    y_off, _ = L.dropout_forward(x, L.dropout(0.25), active=False, rng=rng)
    assert y_off is x


def test_avgpool_and_linear(rng):
    x = rng.standard_normal((2, 3, 4, 5))
    y, _ = L.avgpool_forward(x)
    np.testing.assert_allclose(y, x.mean(axis=(2, 3)))
    spec = L.linear(60, 2)
    params = {"weight": rng.standard_normal((2, 60)), "bias": rng.standard_normal(2)}
    out, _ = L.linear_forward(x, params, spec)
    np.testing.assert_allclose(out, x.reshape(2, -1) @ params["weight"].T + params["bias"])


def test_init_params(rng):
    conv = L.init_params(L.conv2d(3, 8, 3), rng)
    bound = np.sqrt(6 / 27)
    assert np.all(np.abs(conv["weight"]) <= bound)
    np.testing.assert_array_equal(conv["bias"], 0)
    np.testing.assert_array_equal(conv["weight"], conv["weight"].astype(np.float32))
    zero = L.init_params(L.linear(4, 5, zero_init=True), rng)
    assert not zero["weight"].any() and not zero["bias"].any()


@pytest.mark.parametrize("kwargs", [dict(kind="nope"), dict(kind="dropout", p=1.0), dict(kind="linear"),
                                    dict(kind="conv2d", in_channels=1, out_channels=0)])
def test_layerspec_validation(kwargs):
    with pytest.raises(ValueError):
        L.LayerSpec(**kwargs)
