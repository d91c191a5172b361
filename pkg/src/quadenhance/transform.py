"""Quadratic colour transform: basis expansion, per-pixel application, fitting.

An enhancement is a 10x3 coefficient matrix ``theta``; each pixel ``p`` maps to
``theta.T @ V(p) + p`` where ``V(p) = [R, G, B, R^2, G^2, B^2, RG, GB, BR, 1]``.
"""
from __future__ import annotations

import os
import warnings

import numba
import numpy as np

numba.config.THREADING_LAYER = "threadsafe"
# an outdated TBB only means a fallback to omp; keep that notice off stderr
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

N_BASIS = 10
BASIS_NAMES = ("R", "G", "B", "R2", "G2", "B2", "RG", "GB", "BR", "1")


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, deficiency: int):
        self.deficiency = deficiency
        super().__init__(
            f"basis Gram matrix is rank deficient by {deficiency} of {N_BASIS} dimensions; "
            "pass ridge > 0"
        )


def color_basis(p):
    """Quadratic basis vectors, shape ``(..., 10)``."""
    p = np.asarray(p)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    return np.stack([r, g, b, r * r, g * g, b * b, r * g, g * b, b * r, np.ones_like(r)], axis=-1)


def color_basis_jacobian(p):
    """dV/dp, shape ``(..., 10, 3)``."""
    p = np.asarray(p, dtype=np.float64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    jac = np.zeros(p.shape[:-1] + (N_BASIS, 3))
    jac[..., 0, 0] = 1.0
    jac[..., 1, 1] = 1.0
    jac[..., 2, 2] = 1.0
    jac[..., 3, 0] = 2 * r
    jac[..., 4, 1] = 2 * g
    jac[..., 5, 2] = 2 * b
    jac[..., 6, 0] = g
    jac[..., 6, 1] = r
    jac[..., 7, 1] = b
    jac[..., 7, 2] = g
    jac[..., 8, 2] = r
    jac[..., 8, 0] = b
    return jac


@numba.njit(parallel=True, nogil=True, cache=True)
def _apply_kernel(x, theta, out, clamp):
    h, w, _ = x.shape
    for i in numba.prange(h):
        for j in range(w):
            r = x[i, j, 0]
            g = x[i, j, 1]
            b = x[i, j, 2]
            rr = r * r
            gg = g * g
            bb = b * b
            rg = r * g
            gb = g * b
            br = b * r
            for c in range(3):
                s = (
                    theta[0, c] * r
                    + theta[1, c] * g
                    + theta[2, c] * b
                    + theta[3, c] * rr
                    + theta[4, c] * gg
                    + theta[5, c] * bb
                    + theta[6, c] * rg
                    + theta[7, c] * gb
                    + theta[8, c] * br
                    + theta[9, c]
                )
                s = s + x[i, j, c]
                if clamp:
                    if s < 0.0:
                        s = 0.0
                    elif s > 1.0:
                        s = 1.0
                out[i, j, c] = s


def _prepare(x, theta):
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {x.shape}")
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (N_BASIS, 3):
        raise ValueError(f"theta must be 10x3, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    return np.ascontiguousarray(x), np.ascontiguousarray(theta.astype(x.dtype))


def apply_transform(x, theta, out=None):
    """Apply ``theta`` to every pixel of ``x`` and clamp to [0, 1].

    Works at any resolution; each output pixel depends only on the input pixel
    at the same position.  Output dtype follows the input (float32 or float64).
    """
    x, theta = _prepare(x, theta)
    if out is None:
        out = np.empty_like(x)
    _apply_kernel(x, theta, out, True)
    return out


def apply_transform_unclamped(x, theta):
    """Training-time variant of :func:`apply_transform` without the clamp."""
    x, theta = _prepare(x, theta)
    out = np.empty_like(x)
    _apply_kernel(x, theta, out, False)
    return out


def transform_gradients(x, grad_out):
    """Gradient of a loss w.r.t. theta given its gradient w.r.t. the unclamped output."""
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if x.shape != grad_out.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {grad_out.shape}")
    v = color_basis(x.reshape(-1, 3))
    return v.T @ grad_out.reshape(-1, 3)


def transform_input_gradient(x, theta, grad_out):
    """Gradient w.r.t. the input image of ``theta.T @ V(p) + p``."""
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    jv = color_basis_jacobian(x)  # (..., 10, 3)
    # d out_c / d p_k = sum_i theta[i, c] * jv[i, k] + delta_ck
    d = np.einsum("ic,...ik->...ck", theta, jv)
    return np.einsum("...c,...ck->...k", grad_out, d) + grad_out


def gram_system(x, y):
    """Normal-equation pieces (V^T V, V^T (y - x)) accumulated in float64."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
    v = color_basis(x)
    return v.T @ v, v.T @ (y - x)


def fit_least_squares(x, y, ridge: float = 0.0):
    """Closed-form theta minimising sum ||theta^T V(p) + p - y(p)||^2 + ridge ||theta||^2."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    gram, rhs = gram_system(x, y)
    if ridge == 0.0:
        s = np.linalg.svd(gram, compute_uv=False)
        tol = s[0] * N_BASIS * np.finfo(np.float64).eps * 1e3 if s[0] > 0 else 1.0
        rank = int(np.sum(s > tol))
        if rank < N_BASIS:
            raise RankDeficientError(N_BASIS - rank)
    return np.linalg.solve(gram + ridge * np.eye(N_BASIS), rhs)


def least_squares_objective(x, y, theta, ridge: float = 0.0) -> float:
    r = apply_transform_unclamped(np.asarray(x, dtype=np.float64), theta) - np.asarray(y, dtype=np.float64)
    return float(np.sum(r * r) + ridge * np.sum(np.asarray(theta) ** 2))


def format_theta(theta) -> str:
    theta = np.asarray(theta, dtype=np.float64)
    return "".join(" ".join(format(v, ".17g") for v in row) + "\n" for row in theta)


def parse_theta(text: str):
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if len(rows) != N_BASIS or any(len(r) != 3 for r in rows):
        raise ValueError("theta file must hold 10 lines of 3 numbers")
    try:
        theta = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"theta file has a non-numeric entry: {exc}") from None
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta file contains non-finite entries")
    return theta


def save_theta(theta, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_theta(theta))


def load_theta(path: str | os.PathLike):
    with open(path) as fh:
        return parse_theta(fh.read())
