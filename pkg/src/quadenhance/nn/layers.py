"""Layer kinds with explicit forward/backward passes on NCHW / NC numpy arrays.

Every ``*_forward`` returns ``(y, cache)``; the matching ``*_backward`` takes
``(cache, grad_y)`` and returns ``(grad_x, {param_name: grad})``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAYER_KINDS = ("conv2d", "batchnorm", "leaky_relu", "dropout", "avgpool_global", "linear")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 0
    slope: float = 0.2
    p: float = 0.0
    in_features: int = 0
    out_features: int = 0
    zero_init: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d" and min(self.in_channels, self.out_channels, self.kernel, self.stride) < 1:
            raise ValueError(f"invalid conv2d hyperparameters: {self}")
        if self.kind == "conv2d" and self.padding < 0:
            raise ValueError("conv2d padding must be >= 0")
        if self.kind == "batchnorm" and self.in_channels < 1:
            raise ValueError("batchnorm needs in_channels >= 1")
        if self.kind == "dropout" and not 0.0 <= self.p < 1.0:
            raise ValueError(f"drop probability must lie in [0, 1), got {self.p}")
        if self.kind == "linear" and min(self.in_features, self.out_features) < 1:
            raise ValueError(f"invalid linear hyperparameters: {self}")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv2d", "batchnorm", "linear")


def conv2d(cin, cout, kernel=3, stride=1, padding=None):
    return LayerSpec("conv2d", in_channels=cin, out_channels=cout, kernel=kernel, stride=stride,
                     padding=kernel // 2 if padding is None else padding)


def batchnorm(channels):
    return LayerSpec("batchnorm", in_channels=channels)


def leaky_relu(slope=0.2):
    return LayerSpec("leaky_relu", slope=slope)


def dropout(p):
    return LayerSpec("dropout", p=p)


def avgpool_global():
    return LayerSpec("avgpool_global")


def linear(fin, fout, zero_init=False):
    return LayerSpec("linear", in_features=fin, out_features=fout, zero_init=zero_init)


BN_MOMENTUM = 0.1
BN_EPS = 1e-5


def param_shapes(spec: LayerSpec) -> dict:
    if spec.kind == "conv2d":
        return {"weight": (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel),
                "bias": (spec.out_channels,)}
    if spec.kind == "batchnorm":
        return {"gamma": (spec.in_channels,), "beta": (spec.in_channels,)}
    if spec.kind == "linear":
        return {"weight": (spec.out_features, spec.in_features), "bias": (spec.out_features,)}
    return {}


def buffer_shapes(spec: LayerSpec) -> dict:
    if spec.kind == "batchnorm":
        return {"running_mean": (spec.in_channels,), "running_var": (spec.in_channels,)}
    return {}


def init_params(spec: LayerSpec, rng: np.random.Generator) -> dict:
    """He-uniform weights, zero biases; ``zero_init`` layers start at exactly zero.

    Values are drawn in float32 so that saved models round-trip exactly.
    """
    shapes = param_shapes(spec)
    out = {}
    if spec.kind == "batchnorm":
        out["gamma"] = np.ones(shapes["gamma"])
        out["beta"] = np.zeros(shapes["beta"])
        return out
    if spec.kind in ("conv2d", "linear"):
        wshape = shapes["weight"]
        fan_in = int(np.prod(wshape[1:]))
        if spec.zero_init:
            out["weight"] = np.zeros(wshape)
        else:
            bound = np.sqrt(6.0 / fan_in)
            out["weight"] = rng.uniform(-bound, bound, size=wshape).astype(np.float32).astype(np.float64)
        out["bias"] = np.zeros(shapes["bias"])
    return out


def init_buffers(spec: LayerSpec) -> dict:
    if spec.kind == "batchnorm":
        return {"running_mean": np.zeros(spec.in_channels), "running_var": np.ones(spec.in_channels)}
    return {}


# --- conv2d -----------------------------------------------------------------

def _conv_out(n, k, s, p):
    return (n + 2 * p - k) // s + 1


def conv2d_forward(x, params, spec: LayerSpec):
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ValueError(f"expected {spec.in_channels} input channels, got {c}")
    k, s, p = spec.kernel, spec.stride, spec.padding
    ho, wo = _conv_out(h, k, s, p), _conv_out(w, k, s, p)
    if ho < 1 or wo < 1:
        raise ValueError(f"input {h}x{w} too small for kernel {k}")
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    cols = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + s * ho : s, j : j + s * wo : s]
    cols = cols.reshape(n, c * k * k, ho * wo)
    wmat = params["weight"].reshape(spec.out_channels, -1)
    y = np.matmul(wmat, cols) + params["bias"][None, :, None]
    return y.reshape(n, spec.out_channels, ho, wo), (cols, xp.shape, x.shape, ho, wo)


def conv2d_backward(cache, gy, params, spec: LayerSpec):
    cols, xp_shape, x_shape, ho, wo = cache
    n = gy.shape[0]
    k, s, p = spec.kernel, spec.stride, spec.padding
    g = gy.reshape(n, spec.out_channels, ho * wo)
    gw = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(params["weight"].shape)
    gb = g.sum(axis=(0, 2))
    wmat = params["weight"].reshape(spec.out_channels, -1)
    gcols = np.matmul(wmat.T, g).reshape(n, spec.in_channels, k, k, ho, wo)
    gxp = np.zeros(xp_shape, dtype=gy.dtype)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += gcols[:, :, i, j]
    h, w = x_shape[2:]
    gx = gxp[:, :, p : p + h, p : p + w] if p else gxp
    return gx, {"weight": gw, "bias": gb}


# --- batchnorm ----------------------------------------------------------------

def _bn_axes(x):
    return (0, 2, 3) if x.ndim == 4 else (0,)


def _bn_shape(x, v):
    return v[None, :, None, None] if x.ndim == 4 else v[None, :]


def batchnorm_forward(x, params, buffers, spec: LayerSpec, use_batch_stats: bool, update_running: bool):
    if x.shape[1] != spec.in_channels:
        raise ValueError(f"expected {spec.in_channels} channels, got {x.shape[1]}")
    axes = _bn_axes(x)
    if use_batch_stats:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        if update_running:
            m = x.size // x.shape[1]
            unbiased = var * m / max(m - 1, 1)
            buffers["running_mean"] *= 1 - BN_MOMENTUM
            buffers["running_mean"] += BN_MOMENTUM * mean
            buffers["running_var"] *= 1 - BN_MOMENTUM
            buffers["running_var"] += BN_MOMENTUM * unbiased
    else:
        mean = buffers["running_mean"]
        var = buffers["running_var"]
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - _bn_shape(x, mean)) * _bn_shape(x, inv_std)
    y = xhat * _bn_shape(x, params["gamma"]) + _bn_shape(x, params["beta"])
    return y, (xhat, inv_std, use_batch_stats)


def batchnorm_backward(cache, gy, params, spec: LayerSpec):
    xhat, inv_std, batch_stats = cache
    axes = _bn_axes(gy)
    ggamma = np.sum(gy * xhat, axis=axes)
    gbeta = np.sum(gy, axis=axes)
    gxhat = gy * _bn_shape(gy, params["gamma"])
    if batch_stats:
        m = gy.size // gy.shape[1]
        gx = _bn_shape(gy, inv_std / m) * (
            m * gxhat
            - _bn_shape(gy, gxhat.sum(axis=axes))
            - xhat * _bn_shape(gy, np.sum(gxhat * xhat, axis=axes))
        )
    else:
        gx = gxhat * _bn_shape(gy, inv_std)
    return gx, {"gamma": ggamma, "beta": gbeta}


# --- elementwise / pooling / linear ----------------------------------------------

def leaky_relu_forward(x, spec: LayerSpec):
    pos = x > 0
    return np.where(pos, x, spec.slope * x), pos


def leaky_relu_backward(cache, gy, spec: LayerSpec):
    return np.where(cache, gy, spec.slope * gy), {}


def dropout_forward(x, spec: LayerSpec, active: bool, rng):
    if not active or spec.p == 0.0:
        return x, None
    keep = rng.random(x.shape) >= spec.p
    scale = keep / (1.0 - spec.p)
    return x * scale, scale


def dropout_backward(cache, gy):
    return (gy if cache is None else gy * cache), {}


def avgpool_forward(x):
    if x.ndim != 4:
        raise ValueError(f"global average pooling needs NCHW input, got {x.ndim}-d")
    return x.mean(axis=(2, 3)), x.shape


def avgpool_backward(cache, gy):
    n, c, h, w = cache
    return np.broadcast_to(gy[:, :, None, None] / (h * w), cache).copy(), {}


def linear_forward(x, params, spec: LayerSpec):
    shape = x.shape
    flat = x.reshape(shape[0], -1)
    if flat.shape[1] != spec.in_features:
        raise ValueError(f"expected {spec.in_features} input features, got {flat.shape[1]}")
    return flat @ params["weight"].T + params["bias"], (flat, shape)


def linear_backward(cache, gy, params):
    flat, shape = cache
    gw = gy.T @ flat
    gb = gy.sum(axis=0)
    gx = (gy @ params["weight"]).reshape(shape)
    return gx, {"weight": gw, "bias": gb}
