"""Desk-scale experiment setups on synthetic corpora with a planted transform.

The full-size hyperparameters assume thousands of 256x256 photographs.  These
setups shrink data and budget so that every check runs on one CPU core in
minutes; the deviations from the defaults are listed next to each config.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import mean_lab_l2
from .dataset import make_synthetic_corpus, make_unpaired_split
from .train_paired import PairedDataset, TrainConfig
from .train_unpaired import GanConfig, Phase1Config, Phase2Config, UnpairedDataset

DESK_SIZE = 64

# 1 branch, batch 16 and no branch dropout: at 4 steps per epoch, dropout noise
# swamps the epoch-to-epoch decrease of the loss.
PAIRED_DESK = TrainConfig(epochs=200, batch=16, branches=1, resolution=DESK_SIZE, dropout=0.0,
                          checkpoint_interval=0, seed=0)

# Shorter schedule (hold 20, decay to 0 at 40), batch 8, alpha 0.2 and Adam
# beta1 0.5: with 32 + 32 images the default alpha 0.02 lets the adversarial
# term run away, and beta1 0.9 makes the two players oscillate.
GAN_DESK = GanConfig(
    phase1=Phase1Config(epochs=40, batch=8, lr=1e-4, hold_epochs=20, alpha=0.2, beta1=0.5),
    phase2=Phase2Config(epochs=40, batch=32, lr=5e-6, hold_epochs=20),
    seed=0,
    resolution=DESK_SIZE,
)


def paired_desk_dataset(corpus_seed: int = 0, count: int = 64):
    """(dataset, corpus) for the supervised learnability check."""
    corpus = make_synthetic_corpus(count, DESK_SIZE, seed=corpus_seed)
    return PairedDataset(corpus.inputs, corpus.targets, corpus.ids), corpus


@dataclass
class UnpairedSetup:
    dataset: UnpairedDataset
    probe_inputs: list
    probe_targets: list
    theta: np.ndarray

    @property
    def identity_baseline(self) -> float:
        """Probe mean Lab L2 of leaving the inputs untouched."""
        return float(np.mean([mean_lab_l2(x, y) for x, y in zip(self.probe_inputs, self.probe_targets)]))


def unpaired_desk_setup(corpus_seed: int = 0, n_train: int = 64, n_probe: int = 16) -> UnpairedSetup:
    """X = inputs of n/2 ids, Y = planted-transform targets of n/2 other ids, probe = held-out pairs."""
    corpus = make_synthetic_corpus(n_train + n_probe, DESK_SIZE, seed=corpus_seed)
    xs, ys, test = make_unpaired_split(corpus.ids, n_train, seed=corpus_seed)
    x_in, _ = corpus.subset(xs)
    _, y_tgt = corpus.subset(ys)
    p_in, p_tgt = corpus.subset(test)
    return UnpairedSetup(UnpairedDataset(x_in, y_tgt), p_in, p_tgt, corpus.theta)
