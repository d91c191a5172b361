"""Declarative multi-branch networks: spec, parameter registry, forward, backward."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .layers import LayerSpec

MODES = ("train", "eval", "frozen")


@dataclass(frozen=True)
class NetworkSpec:
    """``branches`` copies of ``branch`` see the same input; their outputs are
    concatenated along features and fed through ``head``."""

    name: str
    branches: int
    branch: tuple
    head: tuple
    input_size: int
    output_shape: tuple = (10, 3)

    def __post_init__(self):
        object.__setattr__(self, "branch", tuple(self.branch))
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "output_shape", tuple(self.output_shape))
        if self.branches < 1:
            raise ValueError("a network needs at least one branch")
        out = infer_output_features(self)
        if out != int(np.prod(self.output_shape)):
            raise ValueError(f"{self.name}: final output has {out} features, expected {self.output_shape}")

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.output_shape))

    def layer_paths(self):
        """(path prefix, LayerSpec) in registry order."""
        for b in range(self.branches):
            for i, layer in enumerate(self.branch):
                yield f"branch{b}.{i}", layer
        for i, layer in enumerate(self.head):
            yield f"head.{i}", layer

    def with_dropout(self, p: float) -> "NetworkSpec":
        """Same network with every dropout layer set to rate ``p``."""
        def swap(layers):
            return tuple(L.dropout(p) if s.kind == "dropout" else s for s in layers)
        return NetworkSpec(self.name, self.branches, swap(self.branch), swap(self.head),
                           self.input_size, self.output_shape)

    def to_dict(self) -> dict:
        def dump(layers):
            return [{k: v for k, v in vars(s).items()} for s in layers]
        return {"name": self.name, "branches": self.branches, "branch": dump(self.branch),
                "head": dump(self.head), "input_size": self.input_size,
                "output_shape": list(self.output_shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["name"], d["branches"], tuple(LayerSpec(**s) for s in d["branch"]),
                   tuple(LayerSpec(**s) for s in d["head"]), d["input_size"], tuple(d["output_shape"]))


def _trace_shape(layers, shape, where):
    for i, s in enumerate(layers):
        if s.kind == "conv2d":
            if len(shape) != 3 or shape[0] != s.in_channels:
                raise ValueError(f"{where}.{i} (conv2d) cannot take input of shape {shape}")
            ho = (shape[1] + 2 * s.padding - s.kernel) // s.stride + 1
            wo = (shape[2] + 2 * s.padding - s.kernel) // s.stride + 1
            if ho < 1 or wo < 1:
                raise ValueError(f"{where}.{i} (conv2d) input {shape} too small")
            shape = (s.out_channels, ho, wo)
        elif s.kind == "batchnorm":
            if shape[0] != s.in_channels:
                raise ValueError(f"{where}.{i} (batchnorm) expects {s.in_channels} channels, got {shape}")
        elif s.kind == "avgpool_global":
            if len(shape) != 3:
                raise ValueError(f"{where}.{i} (avgpool_global) needs a CHW input, got {shape}")
            shape = (shape[0],)
        elif s.kind == "linear":
            if int(np.prod(shape)) != s.in_features:
                raise ValueError(f"{where}.{i} (linear) expects {s.in_features} features, got {shape}")
            shape = (s.out_features,)
    return shape


def infer_output_features(spec: NetworkSpec) -> int:
    shape = _trace_shape(spec.branch, (3, spec.input_size, spec.input_size), "branch")
    fused = (spec.branches * int(np.prod(shape)),)
    return int(np.prod(_trace_shape(spec.head, fused, "head")))


@dataclass
class ModelParams:
    """Parameter registry: trainable ``values`` and batchnorm running ``buffers``."""

    values: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    training: bool = True

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.values.items()},
                           {k: v.copy() for k, v in self.buffers.items()}, self.training)

    def digest(self) -> str:
        h = hashlib.sha256()
        for group in (self.values, self.buffers):
            for k in group:
                h.update(k.encode())
                h.update(np.ascontiguousarray(group[k], dtype=np.float64).tobytes())
        return h.hexdigest()

    def snap_float32(self) -> None:
        """Round every entry to float32 precision in place (the model file precision)."""
        for group in (self.values, self.buffers):
            for v in group.values():
                v[...] = v.astype(np.float32)


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> ModelParams:
    params = ModelParams()
    for path, layer in spec.layer_paths():
        for k, v in L.init_params(layer, rng).items():
            params.values[f"{path}.{k}"] = v
        for k, v in L.init_buffers(layer).items():
            params.buffers[f"{path}.{k}"] = v
    return params


def _layer_view(group: dict, path: str, names) -> dict:
    return {n: group[f"{path}.{n}"] for n in names}


def _run_layers(layers, prefix, x, params, mode, rng):
    train = mode == "train"
    caches = []
    for i, s in enumerate(layers):
        path = f"{prefix}.{i}"
        try:
            if s.kind == "conv2d":
                x, c = L.conv2d_forward(x, _layer_view(params.values, path, ("weight", "bias")), s)
            elif s.kind == "batchnorm":
                x, c = L.batchnorm_forward(
                    x,
                    _layer_view(params.values, path, ("gamma", "beta")),
                    _layer_view(params.buffers, path, ("running_mean", "running_var")),
                    s,
                    use_batch_stats=train,
                    update_running=train,
                )
            elif s.kind == "leaky_relu":
                x, c = L.leaky_relu_forward(x, s)
            elif s.kind == "dropout":
                x, c = L.dropout_forward(x, s, active=mode in ("train", "frozen"), rng=rng)
            elif s.kind == "avgpool_global":
                x, c = L.avgpool_forward(x)
            else:
                x, c = L.linear_forward(x, _layer_view(params.values, path, ("weight", "bias")), s)
        except ValueError as exc:
            raise ValueError(f"layer {path} ({s.kind}): {exc}") from None
        caches.append(c)
    return x, caches


def forward(spec: NetworkSpec, params: ModelParams, x, mode: str = "eval", rng=None):
    """Run the network on an ``N x 3 x S x S`` batch.

    Modes: ``train`` (batch statistics, running-stat update, dropout on),
    ``eval`` (running statistics, dropout off), ``frozen`` (running statistics,
    no update, dropout on).  Returns ``(output, cache)``; output has shape
    ``(N, *spec.output_shape)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != (3, spec.input_size, spec.input_size):
        raise ValueError(f"{spec.name}: expected input N x 3 x {spec.input_size} x {spec.input_size}, got {x.shape}")
    if rng is None:
        rng = np.random.default_rng(0)
    outs, branch_caches, shapes = [], [], []
    for b in range(spec.branches):
        y, c = _run_layers(spec.branch, f"branch{b}", x, params, mode, rng)
        shapes.append(y.shape)
        outs.append(y.reshape(y.shape[0], -1))
        branch_caches.append(c)
    fused = np.concatenate(outs, axis=1)
    y, head_cache = _run_layers(spec.head, "head", fused, params, mode, rng)
    cache = {"branch": branch_caches, "head": head_cache, "widths": [o.shape[1] for o in outs],
             "branch_shapes": shapes}
    return y.reshape((x.shape[0],) + spec.output_shape), cache


def _back_layers(layers, prefix, caches, g, params, grads):
    for i in reversed(range(len(layers))):
        s = layers[i]
        path = f"{prefix}.{i}"
        c = caches[i]
        if s.kind == "conv2d":
            g, pg = L.conv2d_backward(c, g, _layer_view(params.values, path, ("weight", "bias")), s)
        elif s.kind == "batchnorm":
            g, pg = L.batchnorm_backward(c, g, _layer_view(params.values, path, ("gamma", "beta")), s)
        elif s.kind == "leaky_relu":
            g, pg = L.leaky_relu_backward(c, g, s)
        elif s.kind == "dropout":
            g, pg = L.dropout_backward(c, g)
        elif s.kind == "avgpool_global":
            g, pg = L.avgpool_backward(c, g)
        else:
            g, pg = L.linear_backward(c, g, _layer_view(params.values, path, ("weight", "bias")))
        for k, v in pg.items():
            grads[f"{path}.{k}"] = v
    return g


def backward(spec: NetworkSpec, params: ModelParams, cache, grad_out):
    """Analytic gradients for every trainable parameter and for the input.

    Returns ``(grads, grad_input)`` with ``grads`` keyed like ``params.values``.
    """
    if cache is None:
        raise ValueError("backward needs the cache of a forward pass")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    n = grad_out.shape[0]
    grads = {}
    g = _back_layers(spec.head, "head", cache["head"], grad_out.reshape(n, -1), params, grads)
    gx = None
    start = 0
    for b in range(spec.branches):
        width = cache["widths"][b]
        gb = g[:, start : start + width].reshape(cache["branch_shapes"][b])
        start += width
        gi = _back_layers(spec.branch, f"branch{b}", cache["branch"][b], gb, params, grads)
        gx = gi if gx is None else gx + gi
    return grads, gx
