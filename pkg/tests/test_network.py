import numpy as np
import pytest

from quadenhance.gradcheck import tiny_network
from quadenhance.nn import (
    NetworkSpec,
    backward,
    discriminator,
    forward,
    init_params,
    paired_generator,
    shared_param_keys,
    unpaired_generator,
)
from quadenhance.nn import layers as L


@pytest.mark.parametrize("branches", [1, 3, 5])
def test_paired_generator_outputs_zero_theta_at_init(rng, branches):
    spec = paired_generator(branches, input_size=32)
    params = init_params(spec, rng)
    out, _ = forward(spec, params, rng.uniform(0, 1, (2, 3, 32, 32)), "train", rng)
    assert out.shape == (2, 10, 3)
    np.testing.assert_array_equal(out, 0.0)


def test_layer_paths_and_registry(rng):
    spec = paired_generator(3, input_size=16)
    params = init_params(spec, rng)
    prefixes = {p for p, _ in spec.layer_paths()}
    assert {k.rsplit(".", 1)[0] for k in params.values} <= prefixes
    assert all(k.startswith(("branch0", "branch1", "branch2", "head")) for k in params.values)


def test_branches_are_independent(rng):
    spec = paired_generator(3, input_size=16)
    params = init_params(spec, rng)
    assert not np.array_equal(params.values["branch0.0.weight"], params.values["branch1.0.weight"])


def test_discriminator_shape(rng):
    spec = discriminator(32)
    out, _ = forward(spec, init_params(spec, rng), rng.uniform(0, 1, (3, 3, 32, 32)), "train", rng)
    assert out.shape == (3, 1)


def test_spec_rejects_mismatch():
    with pytest.raises(ValueError):
        NetworkSpec("bad", 1, [L.conv2d(3, 4), L.avgpool_global(), L.linear(5, 30)], [], 8)


def test_forward_rejects_wrong_input(rng):
    spec = tiny_network()
    with pytest.raises(ValueError, match="expected input"):
        forward(spec, init_params(spec, rng), np.zeros((1, 3, 5, 5)))
    with pytest.raises(ValueError, match="mode"):
        forward(spec, init_params(spec, rng), np.zeros((1, 3, 4, 4)), mode="bogus")


def test_modes(rng):
    spec = tiny_network()
    params = init_params(spec, rng)
    for v in params.values.values():
        v[...] = rng.standard_normal(v.shape)
    x = rng.standard_normal((4, 3, 4, 4))
    buffers = {k: v.copy() for k, v in params.buffers.items()}
    e1, _ = forward(spec, params, x, "eval")
    e2, _ = forward(spec, params, x, "eval")
    np.testing.assert_array_equal(e1, e2)
    f1, _ = forward(spec, params, x, "frozen", np.random.default_rng(0))
    f2, _ = forward(spec, params, x, "frozen", np.random.default_rng(1))
    assert not np.array_equal(f1, f2)  # dropout active
    for k in buffers:
        np.testing.assert_array_equal(params.buffers[k], buffers[k])
    forward(spec, params, x, "train", rng)
    assert any(not np.array_equal(params.buffers[k], buffers[k]) for k in buffers)


def test_backward_gradient_keys(rng):
    spec = tiny_network(branches=3)
    params = init_params(spec, rng)
    out, cache = forward(spec, params, rng.standard_normal((2, 3, 4, 4)), "train", rng)
    grads, gx = backward(spec, params, cache, np.ones_like(out))
    assert set(grads) == set(params.values)
    assert gx.shape == (2, 3, 4, 4)


def test_with_dropout_and_dict_roundtrip():
    spec = unpaired_generator(32)
    d = spec.with_dropout(0.15)
    assert [s.p for s in d.branch if s.kind == "dropout"] == [0.15]
    assert NetworkSpec.from_dict(d.to_dict()) == d


def test_shared_keys_are_conv_only():
    spec = unpaired_generator(32)
    keys = shared_param_keys(spec)
    assert keys and all(".weight" in k or ".bias" in k for k in keys)
    kinds = dict(spec.layer_paths())
    assert all(kinds[k.rsplit(".", 1)[0]].kind == "conv2d" for k in keys)


def test_digest_and_snap(rng):
    spec = tiny_network()
    p = init_params(spec, rng)
    q = p.copy()
    assert p.digest() == q.digest()
    q.values["head.1.bias"][0] = 1 / 3
    assert p.digest() != q.digest()
    q.snap_float32()
    assert q.values["head.1.bias"][0] == np.float32(1 / 3)
