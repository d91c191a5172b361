import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadenhance.dataset import (
    HI,
    LO,
    MAX_SHIFT,
    gram_condition,
    load_pairs,
    make_paired_split,
    make_synthetic_corpus,
    make_unpaired_split,
    planted_theta,
    procedural_image,
    read_pair_manifest,
    read_path_list,
    read_split_manifest,
    write_split_manifest,
)
from quadenhance.transform import apply_transform_unclamped, color_basis, fit_least_squares, load_theta

ids = [f"i{k}" for k in range(30)]


@given(st.integers(1, 29), st.integers(0, 1000))
def test_paired_split_partition(n, seed):
    train, test = make_paired_split(ids, n, seed)
    assert len(train) == n and sorted(train + test) == sorted(ids)
    assert make_paired_split(ids, n, seed) == (train, test)


def test_paired_split_seeds_differ():
    assert make_paired_split(ids, 20, 1) != make_paired_split(ids, 20, 2)


@pytest.mark.parametrize("n", [0, 30, 31])
def test_paired_split_range(n):
    with pytest.raises(ValueError):
        make_paired_split(ids, n, 0)


@given(st.integers(1, 15), st.integers(0, 1000))
def test_unpaired_split(half, seed):
    xs, ys, test = make_unpaired_split(ids, 2 * half, seed)
    assert len(xs) == len(ys) == half and len(test) == 30 - 2 * half
    assert not set(xs) & set(ys)
    assert sorted(xs + ys + test) == sorted(ids)


@pytest.mark.parametrize("n", [3, 32])
def test_unpaired_split_errors(n):
    with pytest.raises(ValueError):
        make_unpaired_split(ids, n, 0)


def test_split_manifest_roundtrip(tmp_path):
    roles = {"train_x": ["a", "b"], "train_y": ["c"], "test": ["d"]}
    write_split_manifest(tmp_path / "s.tsv", roles)
    assert read_split_manifest(tmp_path / "s.tsv") == roles


def test_procedural_image_range_and_spread(rng):
    img = procedural_image(rng, 64)
    assert img.min() >= LO - 1e-12 and img.max() <= HI + 1e-12
    np.testing.assert_array_equal(np.round(img * 255), img * 255)


def test_planted_theta_stays_in_bounds(rng):
    theta = planted_theta(rng)
    g = np.linspace(LO, HI, 41)
    cube = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    assert np.abs(color_basis(cube) @ theta).max() <= MAX_SHIFT


def test_corpus_properties(tmp_path):
    corpus = make_synthetic_corpus(6, 48, seed=5, out_dir=tmp_path)
    stacked = np.concatenate([x.reshape(-1, 3) for x in corpus.inputs])
    assert np.all(stacked.std(axis=0) > 0.15)
    assert gram_condition(corpus.inputs) < 1e6
    for x, y in zip(corpus.inputs, corpus.targets):
        np.testing.assert_allclose(fit_least_squares(x, y), corpus.theta, atol=1e-6)
    np.testing.assert_array_equal(load_theta(tmp_path / "theta_star.txt"), corpus.theta)
    inputs, targets = load_pairs(read_pair_manifest(tmp_path / "pairs.tsv"))
    for a, b in zip(inputs, corpus.inputs):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(targets, corpus.targets):
        assert np.abs(a - b).max() <= 0.5 / 65535 + 1e-12


def test_corpus_is_seeded():
    a, b = make_synthetic_corpus(2, 16, seed=3), make_synthetic_corpus(2, 16, seed=3)
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.targets[1], b.targets[1])


def test_zero_theta_targets_equal_inputs():
    c = make_synthetic_corpus(2, 16, theta_star=np.zeros((10, 3)), seed=0)
    for x, y in zip(c.inputs, c.targets):
        np.testing.assert_array_equal(x, y)


def test_noise_is_added():
    c = make_synthetic_corpus(1, 16, theta_star=np.zeros((10, 3)), noise=0.01, seed=0)
    assert 0.005 < np.std(c.targets[0] - c.inputs[0]) < 0.015


def test_targets_are_planted_transform():
    c = make_synthetic_corpus(2, 16, seed=9)
    np.testing.assert_array_equal(c.targets[0], np.clip(apply_transform_unclamped(c.inputs[0], c.theta), 0, 1))


def test_manifest_readers(tmp_path):
    (tmp_path / "m.tsv").write_text("a.png\tb.png\n\n/abs/c.png\td.png\n")
    pairs = read_pair_manifest(tmp_path / "m.tsv")
    assert pairs[0] == (str(tmp_path / "a.png"), str(tmp_path / "b.png"))
    assert pairs[1][0] == "/abs/c.png"
    (tmp_path / "bad.tsv").write_text("only-one-column\n")
    with pytest.raises(ValueError):
        read_pair_manifest(tmp_path / "bad.tsv")
    (tmp_path / "l.txt").write_text("x.png\n")
    assert read_path_list(tmp_path / "l.txt") == [str(tmp_path / "x.png")]
    (tmp_path / "e.txt").write_text("\n")
    with pytest.raises(ValueError):
        read_path_list(tmp_path / "e.txt")
