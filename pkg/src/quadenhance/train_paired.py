"""Supervised training: predict theta from the input, minimise Lab L2 to the expert image."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .color import mean_lab_l2
from .dataset import load_pairs, read_pair_manifest
from .imageio import apply_augmentation, resize_bilinear, sample_augmentation
from .losses import lab_l2_loss
from .model import Model, enhance, generator_backward, generator_forward
from .nn import AdamState, StaircaseSchedule, adam_step, init_params, paired_generator

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 500
    batch: int = 50
    lr0: float = 9e-4
    lr_end: float = 2e-6
    lr_step_epochs: int = 30
    lr_end_epoch: int = 300
    branches: int = 5
    augment: bool = True
    seed: int = 0
    checkpoint_interval: int = 25
    resolution: int = 256
    dropout: float = 0.5
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if min(self.epochs, self.batch, self.lr_step_epochs, self.lr_end_epoch, self.resolution) < 1:
            raise ValueError("epochs, batch, schedule lengths and resolution must be positive")
        if not self.lr0 >= self.lr_end > 0:
            raise ValueError("need lr0 >= lr_end > 0")
        if self.branches not in (1, 3, 5):
            raise ValueError(f"branches must be 1, 3 or 5, got {self.branches}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def schedule(self) -> StaircaseSchedule:
        return StaircaseSchedule(self.lr0, self.lr_end, self.lr_step_epochs, self.lr_end_epoch)


@dataclass
class PairedDataset:
    """Input/target images already at the training resolution."""

    inputs: list
    targets: list
    ids: list = field(default_factory=list)

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("paired dataset is empty")
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in count")
        for x, y in zip(self.inputs, self.targets):
            if np.shape(x) != np.shape(y):
                raise ValueError(f"pair shapes differ: {np.shape(x)} vs {np.shape(y)}")
        if not self.ids:
            self.ids = list(range(len(self.inputs)))

    @classmethod
    def from_arrays(cls, inputs, targets, resolution: int, ids=None) -> "PairedDataset":
        fit = [resize_bilinear(i, resolution, resolution) for i in inputs]
        tgt = [resize_bilinear(t, resolution, resolution) for t in targets]
        return cls(fit, tgt, list(ids) if ids is not None else [])

    @classmethod
    def from_manifest(cls, path, resolution: int) -> "PairedDataset":
        pairs = read_pair_manifest(path)
        inputs, targets = load_pairs(pairs)
        return cls.from_arrays(inputs, targets, resolution, ids=[Path(a).stem for a, _ in pairs])

    def __len__(self) -> int:
        return len(self.inputs)


def paired_loss(pred, target):
    """Mean Lab L2 between the unclamped prediction and the target, with its gradient."""
    return lab_l2_loss(pred, target)


def model_mean_lab_l2(model: Model, inputs, targets) -> float:
    """Mean Lab L2 of eval-mode enhancements over a set of pairs."""
    return float(np.mean([mean_lab_l2(enhance(model, x), y) for x, y in zip(inputs, targets)]))


@dataclass
class TrainResult:
    model: Model
    history: list  # (epoch, mean_loss, lr)
    best_validation: float | None = None


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "lr"])
        for epoch, loss, lr in history:
            w.writerow([epoch, repr(loss), repr(lr)])


def train_paired(dataset: PairedDataset, config: TrainConfig, validation: PairedDataset | None = None) -> TrainResult:
    """Seeded supervised training loop; returns the model (float32-snapped) and loss history."""
    init_ss, shuffle_ss, aug_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(4)
    spec = paired_generator(config.branches, config.resolution, config.dropout)
    params = init_params(spec, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    aug_rng = np.random.default_rng(aug_ss)
    drop_rng = np.random.default_rng(drop_ss)
    state = AdamState()
    schedule = config.schedule()
    for x in dataset.inputs:
        if np.shape(x)[:2] != (config.resolution, config.resolution):
            raise ValueError(f"dataset images must be {config.resolution}x{config.resolution}, got {np.shape(x)}")

    history = []
    best = None
    best_params = None
    n = len(dataset)
    for epoch in range(config.epochs):
        lr = schedule(epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch)):
            idx = order[start : start + config.batch]
            xs, ys = [], []
            for i in idx:
                x, y = dataset.inputs[i], dataset.targets[i]
                if config.augment:
                    turns, flip = sample_augmentation(aug_rng)
                    x, y = apply_augmentation(x, turns, flip), apply_augmentation(y, turns, flip)
                xs.append(x)
                ys.append(y)
            xs, ys = np.stack(xs), np.stack(ys)
            preds, _, fstate = generator_forward(spec, params, xs, "train", drop_rng)
            loss, grad = paired_loss(preds, ys)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b}, lr {lr:g}")
            grads, _ = generator_backward(spec, params, fstate, grad, input_grad=False)
            adam_step(params.values, grads, state, lr)
            total += loss * len(idx)
        mean_loss = total / n
        history.append((epoch, mean_loss, lr))
        log.info("epoch %d  loss %.5f  lr %.3g", epoch, mean_loss, lr)
        if config.checkpoint_interval and (epoch + 1) % config.checkpoint_interval == 0:
            if validation is not None:
                score = model_mean_lab_l2(Model(spec, params), validation.inputs, validation.targets)
                if best is None or score < best:
                    best, best_params = score, params.copy()
            if config.checkpoint_dir:
                Path(config.checkpoint_dir).mkdir(parents=True, exist_ok=True)
                Model(spec, params).save(Path(config.checkpoint_dir) / f"epoch{epoch + 1:04d}.model")
    if best_params is not None:
        params = best_params
    params.training = False
    params.snap_float32()
    return TrainResult(Model(spec, params), history, best)
