"""Training objectives: CIELab L2, cycle consistency and sigmoid cross-entropy GAN terms."""
from __future__ import annotations

import numpy as np

from .color import srgb_to_lab, srgb_to_lab_jacobian

DELTA_E_GUARD = 1e-8


def lab_l2_loss(pred, target):
    """Mean per-pixel CIE76 distance and its gradient w.r.t. ``pred``.

    ``pred`` may leave [0, 1] (unclamped transform output); its sRGB decoding is
    extended past the unit interval instead of clamped.  Pixels closer than
    ``DELTA_E_GUARD`` contribute no gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = srgb_to_lab(pred, clamp=False) - srgb_to_lab(target, clamp=False)
    de = np.sqrt(np.sum(diff * diff, axis=-1))
    n = de.size
    loss = float(de.mean())
    live = de >= DELTA_E_GUARD
    unit = np.where(live[..., None], diff / np.where(live, de, 1.0)[..., None], 0.0)
    jac = srgb_to_lab_jacobian(pred, clamp=False)
    grad = np.einsum("...l,...lc->...c", unit, jac) / n
    return loss, grad


def cycle_losses(x, x_cycled, y, y_cycled):
    """Lab L2 of both reconstructions; returns (L_cycleX, L_cycleY, grad_x'', grad_y'')."""
    lx, gx = lab_l2_loss(x_cycled, x)
    ly, gy = lab_l2_loss(y_cycled, y)
    return lx, ly, gx, gy


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def gan_losses(real_logits, fake_logits):
    """Sigmoid cross-entropy GAN losses averaged over the batch.

    Returns ``(disc_loss, gen_loss, grads)`` where ``grads`` holds the
    discriminator-loss gradients w.r.t. ``real`` and ``fake`` logits and the
    non-saturating generator-loss gradient w.r.t. the fake logits (``gen``).
    """
    real = np.asarray(real_logits, dtype=np.float64)
    fake = np.asarray(fake_logits, dtype=np.float64)
    disc = float(np.mean(_softplus(-real)) + np.mean(_softplus(fake)))
    gen = float(np.mean(_softplus(-fake)))
    grads = {
        "real": -_sigmoid(-real) / real.size,
        "fake": _sigmoid(fake) / fake.size,
        "gen": -_sigmoid(-fake) / fake.size,
    }
    return disc, gen, grads


def total_phase1_loss(cycle_x: float, cycle_y: float, gan_gx: float, gan_gy: float, alpha: float) -> float:
    """Weighted sum of both cycle terms and both adversarial generator terms."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return alpha * cycle_x + alpha * cycle_y + gan_gx + gan_gy
