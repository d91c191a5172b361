import numpy as np
import pytest

import quadenhance.train_paired as tp
from quadenhance.dataset import make_synthetic_corpus
from quadenhance.train_paired import PairedDataset, TrainConfig, TrainingDiverged, train_paired, write_history


@pytest.fixture(scope="module")
def data():
    c = make_synthetic_corpus(6, 16, seed=2)
    return PairedDataset(c.inputs, c.targets)


def small(**kw):
    base = dict(epochs=3, batch=4, branches=1, resolution=16, dropout=0.0, checkpoint_interval=0)
    base.update(kw)
    return TrainConfig(**base)


def test_defaults_are_published_hyperparameters():
    c = TrainConfig()
    assert (c.epochs, c.batch, c.lr0, c.lr_end, c.lr_step_epochs, c.lr_end_epoch, c.branches) == \
        (500, 50, 9e-4, 2e-6, 30, 300, 5)
    assert c.augment


@pytest.mark.parametrize("kw", [dict(branches=2), dict(epochs=0), dict(lr0=1e-6, lr_end=1e-5), dict(dropout=1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_dataset_validation():
    with pytest.raises(ValueError):
        PairedDataset([], [])
    with pytest.raises(ValueError):
        PairedDataset([np.zeros((4, 4, 3))], [np.zeros((4, 5, 3))])


def test_resolution_mismatch(data):
    with pytest.raises(ValueError, match="8x8"):
        train_paired(data, small(resolution=8))


def test_deterministic_and_loss_falls(data):
    a = train_paired(data, small())
    b = train_paired(data, small())
    assert a.history == b.history
    assert a.model.params.digest() == b.model.params.digest()
    assert a.history[-1][1] < a.history[0][1]
    assert not a.model.params.training


def test_checkpoints_and_best_validation(data, tmp_path):
    r = train_paired(data, small(epochs=4, checkpoint_interval=2, checkpoint_dir=str(tmp_path)), validation=data)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["epoch0002.model", "epoch0004.model"]
    assert r.best_validation is not None


def test_nan_is_reported(data, monkeypatch):
    monkeypatch.setattr(tp, "paired_loss", lambda p, t: (float("nan"), np.zeros_like(p)))
    with pytest.raises(TrainingDiverged, match="epoch 0, batch 0"):
        train_paired(data, small())


def test_history_csv(data, tmp_path):
    r = train_paired(data, small(epochs=2))
    write_history(tmp_path / "h.csv", r.history)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_loss,lr" and len(lines) == 3
