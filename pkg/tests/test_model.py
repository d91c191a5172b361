import numpy as np

from quadenhance.model import Model, enhance, generator_backward, generator_forward, predict_theta
from quadenhance.nn import init_params, paired_generator
from quadenhance.transform import apply_transform


def zero_model(rng, size=16):
    spec = paired_generator(1, input_size=size)
    return Model(spec, init_params(spec, rng))


def test_zero_model_is_identity(rng):
    model = zero_model(rng)
    img = rng.uniform(0, 1, (37, 23, 3))
    out, theta = enhance(model, img, return_theta=True)
    np.testing.assert_array_equal(theta, 0)
    np.testing.assert_array_equal(out, img)


def test_enhance_applies_predicted_theta_at_full_resolution(rng):
    model = zero_model(rng)
    model.params.values["head.0.bias"][:] = rng.standard_normal(30) * 0.02
    img = rng.uniform(0, 1, (40, 50, 3))
    theta = predict_theta(model, img)
    np.testing.assert_array_equal(enhance(model, img), apply_transform(img, theta))


def test_save_load(rng, tmp_path):
    model = zero_model(rng)
    model.save(tmp_path / "m.model")
    assert Model.load(tmp_path / "m.model").params.digest() == model.params.digest()


def test_generator_backward_input_gradient(rng):
    spec = paired_generator(1, input_size=8, p_drop=0.0)
    params = init_params(spec, rng)
    for v in params.values.values():
        v[...] = rng.standard_normal(v.shape) * 0.1
    imgs = rng.uniform(0.1, 0.9, (2, 8, 8, 3))
    proj = rng.standard_normal(imgs.shape)

    def f(x):
        out, _, _ = generator_forward(spec, params.copy(), x, "train", np.random.default_rng(0))
        return float(np.sum(out * proj))

    out, thetas, state = generator_forward(spec, params.copy(), imgs, "train", np.random.default_rng(0))
    assert thetas.shape == (2, 10, 3)
    _, gimg = generator_backward(spec, params, state, proj)
    for _ in range(8):
        idx = tuple(rng.integers(0, s) for s in imgs.shape)
        e = np.zeros_like(imgs)
        e[idx] = 1e-6
        fd = (f(imgs + e) - f(imgs - e)) / 2e-6
        assert abs(fd - gimg[idx]) <= 1e-5 * max(1.0, abs(fd))
