import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadenhance.transform import (
    RankDeficientError,
    apply_transform,
    apply_transform_unclamped,
    color_basis,
    color_basis_jacobian,
    fit_least_squares,
    format_theta,
    least_squares_objective,
    load_theta,
    parse_theta,
    save_theta,
    transform_gradients,
    transform_input_gradient,
)

seeds = st.integers(0, 2**32 - 1)


def reference_apply(x, theta):
    """Literal per-pixel loop."""
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            r, g, b = x[i, j]
            v = np.array([r, g, b, r * r, g * g, b * b, r * g, g * b, b * r, 1.0])
            out[i, j] = theta.T @ v + x[i, j]
    return out


def test_basis_order():
    np.testing.assert_array_equal(color_basis(np.array([2.0, 3.0, 5.0])), [2, 3, 5, 4, 9, 25, 6, 15, 10, 1])


def test_basis_jacobian_finite_difference(rng):
    p = rng.uniform(0, 1, (5, 3))
    jac = color_basis_jacobian(p)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-6
        fd = (color_basis(p + e) - color_basis(p - e)) / 2e-6
        np.testing.assert_allclose(jac[..., k], fd, atol=1e-8)


@given(seeds)
def test_matches_reference_loop(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (5, 4, 3))
    theta = rng.standard_normal((10, 3)) * 0.2
    ref = reference_apply(x, theta)
    np.testing.assert_allclose(apply_transform_unclamped(x, theta), ref, rtol=0, atol=1e-14)
    np.testing.assert_allclose(apply_transform(x, theta), np.clip(ref, 0, 1), rtol=0, atol=1e-14)


def test_zero_theta_is_identity(image):
    np.testing.assert_array_equal(apply_transform(image, np.zeros((10, 3))), image)


def test_float32_path(image):
    x = image.astype(np.float32)
    out = apply_transform(x, np.full((10, 3), 0.01))
    assert out.dtype == np.float32
    np.testing.assert_allclose(out, apply_transform(image, np.full((10, 3), 0.01)), atol=1e-6)


def test_out_buffer(image):
    buf = np.empty_like(image)
    res = apply_transform(image, np.zeros((10, 3)), out=buf)
    assert res is buf


def test_bias_row_shifts_every_pixel(image):
    theta = np.zeros((10, 3))
    theta[9] = [0.05, -0.05, 0.0]
    out = apply_transform_unclamped(image, theta)
    np.testing.assert_allclose(out - image, np.broadcast_to([0.05, -0.05, 0.0], image.shape), atol=1e-15)


@pytest.mark.parametrize("bad", [np.zeros((9, 3)), np.full((10, 3), np.nan), np.zeros((3, 10))])
def test_rejects_bad_theta(image, bad):
    with pytest.raises(ValueError):
        apply_transform(image, bad)


def test_rejects_bad_image():
    with pytest.raises(ValueError, match="HxWx3"):
        apply_transform(np.zeros((4, 4)), np.zeros((10, 3)))


def test_transform_gradients_is_basis_projection(rng):
    x = rng.uniform(0, 1, (3, 4, 3))
    g = rng.standard_normal(x.shape)
    expected = sum(np.outer(color_basis(x[i, j]), g[i, j]) for i in range(3) for j in range(4))
    np.testing.assert_allclose(transform_gradients(x, g), expected, atol=1e-12)


def test_input_gradient_identity_at_zero_theta(rng):
    x = rng.uniform(0, 1, (3, 3, 3))
    g = rng.standard_normal(x.shape)
    np.testing.assert_array_equal(transform_input_gradient(x, np.zeros((10, 3)), g), g)


@given(seeds)
def test_fit_recovers_planted_theta(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 0.9, (16, 16, 3))
    theta = rng.standard_normal((10, 3)) * 0.05
    y = apply_transform_unclamped(x, theta)
    np.testing.assert_allclose(fit_least_squares(x, y), theta, atol=1e-8)


def test_fit_matches_lstsq_oracle(rng):
    x = rng.uniform(0, 1, (10, 10, 3))
    y = rng.uniform(0, 1, (10, 10, 3))
    v = color_basis(x.reshape(-1, 3))
    oracle, *_ = np.linalg.lstsq(v, (y - x).reshape(-1, 3), rcond=None)
    np.testing.assert_allclose(fit_least_squares(x, y), oracle, atol=1e-9)


def test_fit_ridge_lowers_regularised_objective(rng):
    x = rng.uniform(0, 1, (8, 8, 3))
    y = rng.uniform(0, 1, (8, 8, 3))
    ridge = 0.5
    best = fit_least_squares(x, y, ridge=ridge)
    f0 = least_squares_objective(x, y, best, ridge)
    for _ in range(10):
        assert least_squares_objective(x, y, best + rng.standard_normal((10, 3)) * 1e-3, ridge) > f0


def test_constant_image_is_rank_deficient():
    x = np.full((8, 8, 3), 0.5)
    with pytest.raises(RankDeficientError) as err:
        fit_least_squares(x, x)
    assert err.value.deficiency == 9
    np.testing.assert_allclose(fit_least_squares(x, x, ridge=1e-3), 0.0, atol=1e-12)


def test_identical_pair_fits_zero(image):
    np.testing.assert_allclose(fit_least_squares(image, image), 0.0, atol=1e-12)


def test_theta_text_roundtrip(rng, tmp_path):
    theta = rng.standard_normal((10, 3))
    path = tmp_path / "t.txt"
    save_theta(theta, path)
    np.testing.assert_array_equal(load_theta(path), theta)
    assert parse_theta("# comment\n" + format_theta(theta)).tolist() == theta.tolist()


@pytest.mark.parametrize("text", ["1 2 3\n" * 9, "1 2\n" * 10, "1 2 x\n" * 10, "1 2 nan\n" * 10, ""])
def test_parse_theta_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_theta(text)
