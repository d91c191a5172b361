"""Coefficient-predicting generators: network + quadratic transform."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import resize_bilinear
from .nn import ModelParams, NetworkSpec, backward, forward, load_model, save_model
from .transform import (
    apply_transform,
    apply_transform_unclamped,
    transform_gradients,
    transform_input_gradient,
)


@dataclass
class Model:
    spec: NetworkSpec
    params: ModelParams

    def save(self, path) -> None:
        save_model(self.spec, self.params, path)

    @classmethod
    def load(cls, path) -> "Model":
        return cls(*load_model(path))


def to_nchw(images):
    return np.ascontiguousarray(np.transpose(np.asarray(images, dtype=np.float64), (0, 3, 1, 2)))


def to_nhwc(t):
    return np.ascontiguousarray(np.transpose(t, (0, 2, 3, 1)))


def network_input(image, size: int):
    """Squash an image of any shape to the ``size x size`` network input."""
    return resize_bilinear(image, size, size)


def predict_theta(model: Model, image):
    """Eval-mode coefficient matrix for one image of any resolution."""
    small = network_input(image, model.spec.input_size)
    theta, _ = forward(model.spec, model.params, to_nchw(small[None]), mode="eval")
    return theta[0]


def enhance(model: Model, image, return_theta: bool = False):
    """Predict theta from the downsampled image, apply it at full resolution."""
    theta = predict_theta(model, image)
    out = apply_transform(image, theta)
    return (out, theta) if return_theta else out


def generator_forward(spec: NetworkSpec, params: ModelParams, images, mode: str, rng):
    """Unclamped outputs for a batch of network-resolution images ``(N, S, S, 3)``."""
    images = np.asarray(images, dtype=np.float64)
    thetas, cache = forward(spec, params, to_nchw(images), mode=mode, rng=rng)
    outs = np.stack([apply_transform_unclamped(img, th) for img, th in zip(images, thetas)])
    return outs, thetas, (images, thetas, cache)


def generator_backward(spec: NetworkSpec, params: ModelParams, state, grad_outs, input_grad: bool = True):
    """Parameter gradients and, optionally, the gradient w.r.t. the input images."""
    images, thetas, cache = state
    grad_outs = np.asarray(grad_outs, dtype=np.float64)
    g_theta = np.stack([transform_gradients(img, g) for img, g in zip(images, grad_outs)])
    grads, g_net_in = backward(spec, params, cache, g_theta)
    if not input_grad:
        return grads, None
    g_img = np.stack([transform_input_gradient(img, th, g) for img, th, g in zip(images, thetas, grad_outs)])
    return grads, g_img + to_nhwc(g_net_in)
