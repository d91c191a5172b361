"""sRGB / linear RGB / CIELab conversions (D65, 2 degree observer) and CIE76 distances.

All functions are vectorized over leading axes; the last axis holds the three
channels.  Scalars and ``(..., 3)`` arrays are both accepted.
"""
from __future__ import annotations

import numpy as np

SRGB_BREAK = 0.04045
LINEAR_BREAK = 0.0031308
LAB_DELTA = 6.0 / 29.0
LAB_BREAK = LAB_DELTA**3

# IEC 61966-2-1 primaries, D65.
RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# Reference white is the image of sRGB white, so [1, 1, 1] lands exactly on a = b = 0.
WHITE_D65 = RGB_TO_XYZ.sum(axis=1)


def srgb_to_linear(c, clamp: bool = True):
    """Decode sRGB-encoded values to linear light.

    With ``clamp=False`` the two branches are extended past [0, 1] (linear
    segment below zero, power segment above one) so unclamped network outputs
    keep a usable gradient.
    """
    c = np.asarray(c, dtype=np.float64)
    if clamp:
        c = np.clip(c, 0.0, 1.0)
    power = np.power(np.maximum(c + 0.055, 0.0) / 1.055, 2.4)
    return np.where(c >= SRGB_BREAK, power, c / 12.92)


def linear_to_srgb(c, clamp: bool = True):
    c = np.asarray(c, dtype=np.float64)
    if clamp:
        c = np.clip(c, 0.0, 1.0)
    power = 1.055 * np.power(np.maximum(c, 0.0), 1.0 / 2.4) - 0.055
    return np.where(c >= LINEAR_BREAK, power, 12.92 * c)


def _lab_f(t):
    return np.where(t >= LAB_BREAK, np.cbrt(t), t / (3.0 * LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_prime(t):
    safe = np.where(t >= LAB_BREAK, t, 1.0)
    return np.where(t >= LAB_BREAK, 1.0 / (3.0 * np.cbrt(safe) ** 2), 1.0 / (3.0 * LAB_DELTA**2))


def _srgb_to_linear_prime(c):
    safe = np.maximum(c + 0.055, 1e-12)
    power = 2.4 / 1.055 * np.power(safe / 1.055, 1.4)
    return np.where(c >= SRGB_BREAK, power, 1.0 / 12.92)


def srgb_to_xyz(rgb, clamp: bool = True):
    lin = srgb_to_linear(rgb, clamp=clamp)
    return lin @ RGB_TO_XYZ.T


def xyz_to_lab(xyz):
    f = _lab_f(np.asarray(xyz) / WHITE_D65)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def srgb_to_lab(rgb, clamp: bool = True):
    """Convert sRGB values in [0, 1] to CIELab under D65."""
    return xyz_to_lab(srgb_to_xyz(rgb, clamp=clamp))


def srgb_to_lab_jacobian(rgb, clamp: bool = True):
    """Analytic d(L, a, b)/d(R, G, B), shape ``(..., 3, 3)``.

    Rows index Lab outputs, columns index RGB inputs.  At the piecewise
    breakpoints the power / cube-root branch is used.  With ``clamp=True``
    channels outside [0, 1] get a zero column, matching the clamped forward.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    c = np.clip(rgb, 0.0, 1.0) if clamp else rgb
    dlin = _srgb_to_linear_prime(c)
    if clamp:
        dlin = np.where((rgb < 0.0) | (rgb > 1.0), 0.0, dlin)
    xyz = srgb_to_linear(c, clamp=False) @ RGB_TO_XYZ.T
    df = _lab_f_prime(xyz / WHITE_D65) / WHITE_D65
    # d f_k / d rgb_j = df_k * M[k, j] * dlin_j
    dfdrgb = df[..., :, None] * RGB_TO_XYZ * dlin[..., None, :]
    jac = np.empty(rgb.shape[:-1] + (3, 3))
    jac[..., 0, :] = 116.0 * dfdrgb[..., 1, :]
    jac[..., 1, :] = 500.0 * (dfdrgb[..., 0, :] - dfdrgb[..., 1, :])
    jac[..., 2, :] = 200.0 * (dfdrgb[..., 1, :] - dfdrgb[..., 2, :])
    return jac


def lab_delta_e(x, y):
    """CIE76 colour difference, the Euclidean norm of the Lab difference."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return np.sqrt(np.sum(d * d, axis=-1))


def _check_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def delta_e_map(a, b, clamp: bool = True):
    """Per-pixel CIE76 distance between two sRGB images."""
    _check_same_shape(a, b)
    return lab_delta_e(srgb_to_lab(a, clamp=clamp), srgb_to_lab(b, clamp=clamp))


def mean_lab_l2(a, b) -> float:
    """Mean per-pixel CIE76 distance between two sRGB images of equal shape."""
    return float(np.mean(delta_e_map(a, b)))
