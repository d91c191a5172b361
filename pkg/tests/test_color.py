import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from skimage import color as skcolor

from quadenhance.color import (
    delta_e_map,
    lab_delta_e,
    linear_to_srgb,
    mean_lab_l2,
    srgb_to_lab,
    srgb_to_lab_jacobian,
    srgb_to_linear,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
pixels = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(3)), elements=unit)


def test_white_and_black():
    np.testing.assert_allclose(srgb_to_lab([1.0, 1.0, 1.0]), [100.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(srgb_to_lab([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0], atol=1e-12)


def test_primaries_reference_values():
    # widely tabulated D65 values for the sRGB primaries
    expected = {(1, 0, 0): (53.24, 80.09, 67.20), (0, 1, 0): (87.73, -86.18, 83.18), (0, 0, 1): (32.30, 79.19, -107.86)}
    for rgb, lab in expected.items():
        np.testing.assert_allclose(srgb_to_lab(np.array(rgb, float)), lab, atol=0.02)


@given(pixels)
def test_matches_skimage(p):
    ours = srgb_to_lab(p)
    theirs = skcolor.rgb2lab(p[None], illuminant="D65", observer="2")[0]
    # the two implementations round the primaries matrix and white point differently
    assert np.max(np.abs(ours - theirs)) < 0.05


@given(arrays(np.float64, 8, elements=unit))
def test_srgb_linear_roundtrip(c):
    np.testing.assert_allclose(linear_to_srgb(srgb_to_linear(c)), c, atol=1e-12)


def test_decoding_is_continuous_at_break():
    b = 0.04045
    lo, hi = srgb_to_linear(np.nextafter(b, 0)), srgb_to_linear(b)
    assert abs(hi - lo) < 1e-7


def test_unclamped_decoding_extends_outside_unit_interval():
    assert srgb_to_linear(-0.1, clamp=False) == pytest.approx(-0.1 / 12.92)
    assert srgb_to_linear(1.2, clamp=False) > 1.0
    assert srgb_to_linear(1.2) == 1.0
    assert srgb_to_linear(-0.1) == 0.0


@pytest.mark.parametrize("clamp", [True, False])
def test_jacobian_matches_finite_differences(rng, clamp):
    lo, hi = (0.0, 1.0) if clamp else (-0.2, 1.2)
    p = rng.uniform(lo + 0.01, hi - 0.01, (20, 3))
    jac = srgb_to_lab_jacobian(p, clamp=clamp)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (srgb_to_lab(p + e, clamp=clamp) - srgb_to_lab(p - e, clamp=clamp)) / (2 * h)
        np.testing.assert_allclose(jac[..., :, k], fd, rtol=1e-5, atol=1e-4)


def test_delta_e_is_euclidean():
    assert lab_delta_e([50, 3, 0], [50, 0, 4]) == pytest.approx(5.0)


@given(pixels, pixels)
def test_delta_e_symmetric_and_nonnegative(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    d = delta_e_map(a, b)
    assert np.all(d >= 0)
    np.testing.assert_array_equal(d, delta_e_map(b, a))


def test_mean_lab_l2_identical_is_zero(image):
    assert mean_lab_l2(image, image) == 0.0


def test_mean_lab_l2_shape_mismatch(image):
    with pytest.raises(ValueError, match="shape"):
        mean_lab_l2(image, image[:-1])
