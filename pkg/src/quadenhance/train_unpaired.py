"""Unpaired training: two-way GAN with cycle consistency, then cycle-only refinement of G_X.

Phase 1 trains G_X: X -> Y, G_Y: Y -> X and discriminators D_X, D_Y.  With
weight sharing the convolution weights of both generators are one set of
arrays; batchnorm and linear parameters stay private.  Phase 2 unshares the
generators, freezes G_Y and both discriminators, and trains G_X with dropout on
the reconstruction y'' = G_X(G_Y(y)) only.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .color import mean_lab_l2
from .dataset import read_path_list
from .imageio import apply_augmentation, load_image, resize_bilinear, sample_augmentation
from .losses import cycle_losses, gan_losses, lab_l2_loss, total_phase1_loss
from .model import Model, enhance, generator_backward, generator_forward, to_nchw, to_nhwc
from .nn import (
    AdamState,
    HoldDecaySchedule,
    ModelParams,
    NetworkSpec,
    adam_step,
    backward,
    discriminator,
    forward,
    init_params,
    shared_param_keys,
    unpaired_generator,
)
from .train_paired import TrainingDiverged

log = logging.getLogger(__name__)

HISTORY_HEADER = ["epoch", "cycle_x", "cycle_y", "gan_gx", "gan_gy", "disc_x", "disc_y", "lr"]


@dataclass
class Phase1Config:
    epochs: int = 200
    batch: int = 20
    lr: float = 1e-4
    hold_epochs: int = 100
    disc_dropout: float = 0.12
    alpha: float = 0.02
    share_weights: bool = True
    gen_dropout: float = 0.0
    beta1: float = 0.9


@dataclass
class Phase2Config:
    enabled: bool = True
    epochs: int = 200
    batch: int = 50
    lr: float = 5e-6
    hold_epochs: int = 100
    gen_dropout: float = 0.15


@dataclass
class GanConfig:
    phase1: Phase1Config = field(default_factory=Phase1Config)
    phase2: Phase2Config = field(default_factory=Phase2Config)
    seed: int = 0
    resolution: int = 256
    augment: bool = True
    gen_channels: tuple = (16, 32, 64, 128, 256)
    disc_channels: tuple = (32, 64, 128, 256)
    debug: bool = False

    def __post_init__(self):
        if self.phase1.alpha < 0:
            raise ValueError("alpha must be non-negative")
        for name, p in (("phase1.disc_dropout", self.phase1.disc_dropout),
                        ("phase1.gen_dropout", self.phase1.gen_dropout),
                        ("phase2.gen_dropout", self.phase2.gen_dropout)):
            if not 0 <= p < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {p}")
        for name, v in (("phase1.epochs", self.phase1.epochs), ("phase1.batch", self.phase1.batch),
                        ("phase2.epochs", self.phase2.epochs), ("phase2.batch", self.phase2.batch),
                        ("resolution", self.resolution)):
            if v < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class UnpairedDataset:
    """X (inputs) and Y (target style) images at the training resolution."""

    x: list
    y: list

    def __post_init__(self):
        if not self.x or not self.y:
            raise ValueError("both unpaired sets must be non-empty")

    @classmethod
    def from_arrays(cls, x, y, resolution: int) -> "UnpairedDataset":
        return cls([resize_bilinear(i, resolution, resolution) for i in x],
                   [resize_bilinear(i, resolution, resolution) for i in y])

    @classmethod
    def from_lists(cls, x_list, y_list, resolution: int) -> "UnpairedDataset":
        xs, ys = read_path_list(x_list), read_path_list(y_list)
        overlap = set(map(str, xs)) & set(map(str, ys))
        if overlap:
            raise ValueError(f"X and Y share files, e.g. {sorted(overlap)[0]}")
        return cls.from_arrays([load_image(p) for p in xs], [load_image(p) for p in ys], resolution)


@dataclass
class GeneratorPair:
    """G_X and G_Y parameter registries.

    Keys in ``shared_keys`` map to the *same* array objects in both registries,
    so an in-place update through either generator is seen by the other.
    """

    spec: NetworkSpec
    gx: ModelParams
    gy: ModelParams
    shared_keys: tuple = ()

    @classmethod
    def initialise(cls, spec: NetworkSpec, share: bool, rng_x, rng_y) -> "GeneratorPair":
        gx = init_params(spec, rng_x)
        gy = init_params(spec, rng_y)
        keys = tuple(shared_param_keys(spec)) if share else ()
        for k in keys:
            gy.values[k] = gx.values[k]
        return cls(spec, gx, gy, keys)

    def private_keys(self):
        return tuple(k for k in self.gx.values if k not in self.shared_keys)

    def trainable(self) -> dict:
        """Unique trainable arrays, keyed ``shared.*``, ``gx.*`` and ``gy.*``."""
        out = {f"shared.{k}": self.gx.values[k] for k in self.shared_keys}
        for k in self.private_keys():
            out[f"gx.{k}"] = self.gx.values[k]
            out[f"gy.{k}"] = self.gy.values[k]
        return out

    def merge_grads(self, grads_x: dict, grads_y: dict) -> dict:
        """Per-generator gradients to the :meth:`trainable` keys; shared entries are summed."""
        out = {}
        for k in self.shared_keys:
            out[f"shared.{k}"] = grads_x.get(k, 0.0) + grads_y.get(k, 0.0)
        for k in self.private_keys():
            if k in grads_x:
                out[f"gx.{k}"] = grads_x[k]
            if k in grads_y:
                out[f"gy.{k}"] = grads_y[k]
        return out

    def shared_consistent(self) -> bool:
        return all(self.gx.values[k] is self.gy.values[k] and np.array_equal(self.gx.values[k], self.gy.values[k])
                   for k in self.shared_keys)

    def unshare(self) -> "GeneratorPair":
        return GeneratorPair(self.spec, self.gx.copy(), self.gy.copy(), ())

    def model_x(self) -> Model:
        return Model(self.spec, self.gx)

    def model_y(self) -> Model:
        return Model(self.spec, self.gy)


@dataclass
class UnpairedResult:
    pair: GeneratorPair
    d_x: Model
    d_y: Model
    phase1_history: list
    phase2_history: list = field(default_factory=list)

    @property
    def model(self) -> Model:
        return self.pair.model_x()


def _disc_forward(model: Model, images, mode, rng):
    return forward(model.spec, model.params, to_nchw(images), mode=mode, rng=rng)


def _joint_logits(d: Model, real, fake, rng):
    """Logits of real and fake images from one forward pass.

    Both halves share one batchnorm batch, so the normalisation cannot cancel
    a global colour difference between them.
    """
    logits, cache = _disc_forward(d, np.concatenate([real, fake]), "train", rng)
    return logits[: len(real)], logits[len(real) :], cache


def discriminator_step(d: Model, real, fake, rng):
    """Discriminator loss and gradients on real vs. detached fake images.

    The returned gradient registry holds discriminator parameters only: fakes
    enter as plain arrays, so nothing flows back to a generator.
    """
    lr_real, lr_fake, cache = _joint_logits(d, real, fake, rng)
    loss, _, g = gan_losses(lr_real, lr_fake)
    grads, _ = backward(d.spec, d.params, cache, np.concatenate([g["real"], g["fake"]]))
    return loss, grads


def _adversarial_input_grad(d: Model, real, fake, rng):
    """Non-saturating generator loss through ``d`` and its gradient w.r.t. ``fake``."""
    lr_real, lr_fake, cache = _joint_logits(d, real, fake, rng)
    _, gen_loss, g = gan_losses(lr_real, lr_fake)
    _, g_in = backward(d.spec, d.params, cache, np.concatenate([np.zeros_like(lr_real), g["gen"]]))
    return gen_loss, to_nhwc(g_in)[len(real) :]


def _augment_batch(images, rng, enabled):
    if not enabled:
        return np.stack(images)
    return np.stack([apply_augmentation(i, *sample_augmentation(rng)) for i in images])


def _check_finite(values, phase, epoch, batch, lr):
    if not all(np.isfinite(v) for v in values):
        raise TrainingDiverged(f"non-finite loss in {phase} at epoch {epoch}, batch {batch}, lr {lr:g}")


def _batches(n_x, n_y, batch, rng_x, rng_y):
    """Zip independently shuffled X and Y index batches over max(|X|, |Y|) draws."""
    n = max(n_x, n_y)
    ox = np.concatenate([rng_x.permutation(n_x) for _ in range(-(-n // n_x))])[:n]
    oy = np.concatenate([rng_y.permutation(n_y) for _ in range(-(-n // n_y))])[:n]
    for start in range(0, n, batch):
        yield ox[start : start + batch], oy[start : start + batch]


def train_phase1(dataset: UnpairedDataset, config: GanConfig, step_callback=None) -> UnpairedResult:
    """Alternating D / G updates per batch on the adversarial + weighted cycle objective.

    ``step_callback(pair, epoch, batch)`` runs after every generator update.
    """
    p1 = config.phase1
    ss = np.random.SeedSequence(config.seed).spawn(8)
    rng = [np.random.default_rng(s) for s in ss]
    init_gx, init_gy, init_dx, init_dy, shuffle_x, shuffle_y, aug_rng, drop_rng = rng
    spec = unpaired_generator(config.resolution, p1.gen_dropout, config.gen_channels)
    pair = GeneratorPair.initialise(spec, p1.share_weights, init_gx, init_gy)
    dspec = discriminator(config.resolution, p1.disc_dropout, config.disc_channels)
    d_x = Model(dspec, init_params(dspec, init_dx))
    d_y = Model(dspec, init_params(dspec, init_dy))
    g_state, dx_state, dy_state = AdamState(), AdamState(), AdamState()
    schedule = HoldDecaySchedule(p1.lr, p1.hold_epochs, p1.epochs)
    alpha = p1.alpha

    history = []
    for epoch in range(p1.epochs):
        lr = schedule(epoch)
        sums = np.zeros(6)
        count = 0
        for b, (ix, iy) in enumerate(_batches(len(dataset.x), len(dataset.y), p1.batch, shuffle_x, shuffle_y)):
            xb = _augment_batch([dataset.x[i] for i in ix], aug_rng, config.augment)
            yb = _augment_batch([dataset.y[i] for i in iy], aug_rng, config.augment)

            y1, _, s_x = generator_forward(spec, pair.gx, xb, "train", drop_rng)  # y' = G_X(x)
            x1, _, s_y = generator_forward(spec, pair.gy, yb, "train", drop_rng)  # x' = G_Y(y)

            disc_y, gdy = discriminator_step(d_y, yb, y1, drop_rng)
            disc_x, gdx = discriminator_step(d_x, xb, x1, drop_rng)
            adam_step(d_y.params.values, gdy, dy_state, lr, beta1=p1.beta1)
            adam_step(d_x.params.values, gdx, dx_state, lr, beta1=p1.beta1)

            x2, _, s_xy = generator_forward(spec, pair.gy, y1, "train", drop_rng)  # x'' = G_Y(G_X(x))
            y2, _, s_yx = generator_forward(spec, pair.gx, x1, "train", drop_rng)  # y'' = G_X(G_Y(y))
            cx, cy, g_x2, g_y2 = cycle_losses(xb, x2, yb, y2)
            gan_gx, g_y1_adv = _adversarial_input_grad(d_y, yb, y1, drop_rng)
            gan_gy, g_x1_adv = _adversarial_input_grad(d_x, xb, x1, drop_rng)
            _check_finite([cx, cy, gan_gx, gan_gy, disc_x, disc_y], "phase 1", epoch, b, lr)

            gy_a, g_y1_cyc = generator_backward(spec, pair.gy, s_xy, alpha * g_x2)
            gx_a, _ = generator_backward(spec, pair.gx, s_x, g_y1_cyc + g_y1_adv, input_grad=False)
            gx_b, g_x1_cyc = generator_backward(spec, pair.gx, s_yx, alpha * g_y2)
            gy_b, _ = generator_backward(spec, pair.gy, s_y, g_x1_cyc + g_x1_adv, input_grad=False)
            grads_x = {k: gx_a[k] + gx_b[k] for k in gx_a}
            grads_y = {k: gy_a[k] + gy_b[k] for k in gy_a}
            adam_step(pair.trainable(), pair.merge_grads(grads_x, grads_y), g_state, lr, beta1=p1.beta1)
            if config.debug and not pair.shared_consistent():
                raise AssertionError(f"shared generator weights diverged at epoch {epoch}, batch {b}")
            if step_callback is not None:
                step_callback(pair, epoch, b)

            sums += np.array([cx, cy, gan_gx, gan_gy, disc_x, disc_y]) * len(ix)
            count += len(ix)
        means = sums / count
        history.append((epoch, *map(float, means), lr))
        log.info("phase1 epoch %d  cycle %.3f/%.3f  gan %.3f/%.3f  disc %.3f/%.3f  total %.3f", epoch,
                 *means, total_phase1_loss(means[0], means[1], means[2], means[3], alpha))
    for p in (pair.gx, pair.gy, d_x.params, d_y.params):
        p.training = False
        p.snap_float32()
    return UnpairedResult(pair, d_x, d_y, history)


def train_phase2(result: UnpairedResult, dataset: UnpairedDataset, config: GanConfig) -> UnpairedResult:
    """Cycle-only refinement of an unshared copy of G_X; G_Y and discriminators stay frozen."""
    p2 = config.phase2
    ss = np.random.SeedSequence([config.seed, 2]).spawn(3)
    shuffle_rng, aug_rng, drop_rng = (np.random.default_rng(s) for s in ss)
    pair = result.pair.unshare()
    spec = pair.spec.with_dropout(p2.gen_dropout)
    pair = replace(pair, spec=spec)
    state = AdamState()
    schedule = HoldDecaySchedule(p2.lr, p2.hold_epochs, p2.epochs)
    history = []
    n = len(dataset.y)
    for epoch in range(p2.epochs):
        lr = schedule(epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, p2.batch)):
            idx = order[start : start + p2.batch]
            yb = _augment_batch([dataset.y[i] for i in idx], aug_rng, config.augment)
            x1, _, _ = generator_forward(spec, pair.gy, yb, "frozen", drop_rng)
            y2, _, s = generator_forward(spec, pair.gx, x1, "train", drop_rng)
            loss, g = lab_l2_loss(y2, yb)
            _check_finite([loss], "phase 2", epoch, b, lr)
            grads, _ = generator_backward(spec, pair.gx, s, g, input_grad=False)
            adam_step(pair.gx.values, grads, state, lr)
            total += loss * len(idx)
        history.append((epoch, None, total / n, None, None, None, None, lr))
        log.info("phase2 epoch %d  cycle_y %.4f", epoch, total / n)
    pair.gx.training = False
    pair.gx.snap_float32()
    return UnpairedResult(pair, result.d_x, result.d_y, result.phase1_history, history)


def train_unpaired(dataset: UnpairedDataset, config: GanConfig, step_callback=None) -> UnpairedResult:
    result = train_phase1(dataset, config, step_callback)
    if config.phase2.enabled:
        result = train_phase2(result, dataset, config)
    return result


def probe_mean_lab_l2(model: Model, inputs, targets) -> float:
    return float(np.mean([mean_lab_l2(enhance(model, x), y) for x, y in zip(inputs, targets)]))


# name -> (share_weights, phase2 enabled, phase-1 generator dropout, phase-2 generator dropout)
ABLATIONS = {
    "complete": (True, True, 0.0, None),
    "no_shared_weights": (False, True, 0.0, None),
    "first_phase_only": (True, False, 0.0, None),
    "first_phase_only_with_dropout": (True, False, None, None),
    "complete_without_dropout": (True, True, 0.0, 0.0),
    "raw": (False, False, 0.0, None),
}


def ablation_config(variant: str, base: GanConfig) -> GanConfig:
    """Toggle sharing, the second phase and dropout placement for one ablation arm.

    ``None`` entries in :data:`ABLATIONS` take the base phase-2 dropout rate.
    """
    try:
        share, phase2, drop1, drop2 = ABLATIONS[variant]
    except KeyError:
        raise KeyError(f"unknown ablation {variant!r}; choose from {', '.join(ABLATIONS)}") from None
    rate = base.phase2.gen_dropout
    p1 = replace(base.phase1, share_weights=share, gen_dropout=rate if drop1 is None else drop1)
    p2 = replace(base.phase2, enabled=phase2, gen_dropout=rate if drop2 is None else drop2)
    return replace(base, phase1=p1, phase2=p2)


def ablation_run(variant: str, dataset: UnpairedDataset, base: GanConfig, probe=None):
    """Train one ablation arm; returns (result, probe mean Lab L2 or None)."""
    result = train_unpaired(dataset, ablation_config(variant, base))
    metric = probe_mean_lab_l2(result.model, *probe) if probe is not None else None
    return result, metric


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for row in history:
            w.writerow(["" if v is None else (v if isinstance(v, int) else repr(float(v))) for v in row])


def save_result(result: UnpairedResult, out_model) -> list:
    """G_X goes to ``out_model``; G_Y and both discriminators to sibling files."""
    out = Path(out_model)
    paths = [out, out.with_suffix(".gy.model"), out.with_suffix(".dx.model"), out.with_suffix(".dy.model")]
    result.pair.model_x().save(paths[0])
    result.pair.model_y().save(paths[1])
    result.d_x.save(paths[2])
    result.d_y.save(paths[3])
    return paths


def load_result(out_model) -> UnpairedResult:
    out = Path(out_model)
    gx = Model.load(out)
    gy = Model.load(out.with_suffix(".gy.model"))
    return UnpairedResult(GeneratorPair(gx.spec, gx.params, gy.params, ()),
                          Model.load(out.with_suffix(".dx.model")), Model.load(out.with_suffix(".dy.model")), [])
