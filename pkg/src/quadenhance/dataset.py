"""Train/test splits and synthetic corpora with a planted global transform."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imageio import load_image, save_image
from .transform import apply_transform_unclamped, color_basis, save_theta

# Synthetic inputs stay inside [LO, HI] so a planted transform with shift at
# most MAX_SHIFT never needs clamping.
LO, HI = 0.1, 0.9
MAX_SHIFT = 0.1


def make_paired_split(ids, n_train: int, seed: int):
    """Seeded shuffle then prefix split into (train, test)."""
    ids = list(ids)
    if not 0 < n_train < len(ids):
        raise ValueError(f"n_train must lie in [1, {len(ids) - 1}], got {n_train}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def make_unpaired_split(ids, n: int, seed: int):
    """(X ids, Y ids, test ids): X takes inputs of the first n/2 shuffled ids,
    Y takes targets of the next n/2, so no training pair is complete."""
    ids = list(ids)
    if n % 2:
        raise ValueError(f"unpaired training size must be even, got {n}")
    if not 0 < n <= len(ids):
        raise ValueError(f"n must lie in [2, {len(ids)}], got {n}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    half = n // 2
    return shuffled[:half], shuffled[half:n], shuffled[n:]


def write_split_manifest(path, roles: dict) -> None:
    """``roles`` maps a role name (train_x, train_y, train, test) to a list of ids."""
    with open(path, "w") as fh:
        for role, members in roles.items():
            for ident in members:
                fh.write(f"{ident}\t{role}\n")


def read_split_manifest(path) -> dict:
    roles: dict = {}
    with open(path) as fh:
        for line in fh:
            if line.strip():
                ident, role = line.rstrip("\n").split("\t")
                roles.setdefault(role, []).append(ident)
    return roles


def procedural_image(rng: np.random.Generator, size: int):
    """Colourful test image: smooth colour ramps plus random flat patches and discs.

    Values lie in [LO, HI] on the 8-bit grid, so the image survives an 8-bit
    save/load unchanged.
    """
    v, u = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    img = np.empty((size, size, 3))
    for c in range(3):
        a, b, d = rng.uniform(-1, 1, 3)
        freq = rng.uniform(0.5, 3.0)
        phase = rng.uniform(0, 2 * np.pi)
        img[..., c] = 0.5 + 0.35 * (a * (u - 0.5) + b * (v - 0.5)) + 0.25 * d * np.sin(freq * np.pi * (u + v) + phase)
    for _ in range(int(rng.integers(4, 10))):
        colour = rng.uniform(0, 1, 3)
        if rng.random() < 0.5:
            h, w = rng.integers(size // 8 + 1, size // 2 + 2, 2)
            top, left = rng.integers(0, size - h + 1), rng.integers(0, size - w + 1)
            img[top : top + h, left : left + w] = colour
        else:
            cy, cx = rng.uniform(0, 1, 2)
            r = rng.uniform(0.05, 0.25)
            img[(u - cx) ** 2 + (v - cy) ** 2 < r * r] = colour
    img = LO + (HI - LO) * np.clip(img, 0.0, 1.0)
    return np.clip(np.floor(img * 255 + 0.5), np.ceil(LO * 255), np.floor(HI * 255)) / 255


def planted_theta(rng: np.random.Generator, max_shift: float = MAX_SHIFT, lo: float = LO, hi: float = HI):
    """Random coefficient matrix whose colour shift on [lo, hi]^3 stays below ``max_shift``."""
    theta = rng.standard_normal((10, 3))
    grid = np.linspace(lo, hi, 17)
    cube = np.stack(np.meshgrid(grid, grid, grid, indexing="ij"), axis=-1).reshape(-1, 3)
    peak = np.abs(color_basis(cube) @ theta).max()
    # 5% margin for extrema between grid points
    return theta * (0.95 * max_shift / peak)


def gram_condition(images) -> float:
    v = color_basis(np.concatenate([np.asarray(i).reshape(-1, 3) for i in images]))
    return float(np.linalg.cond(v.T @ v))


@dataclass
class SyntheticCorpus:
    ids: list
    inputs: list
    targets: list
    theta: np.ndarray
    input_paths: list = field(default_factory=list)
    target_paths: list = field(default_factory=list)
    manifest: Path | None = None

    def subset(self, ids):
        pos = {ident: i for i, ident in enumerate(self.ids)}
        idx = [pos[i] for i in ids]
        return [self.inputs[i] for i in idx], [self.targets[i] for i in idx]


def make_synthetic_corpus(k: int, size: int, theta_star=None, noise: float = 0.0, seed: int = 0,
                          out_dir=None) -> SyntheticCorpus:
    """Procedural inputs and targets ``clamp(apply(input, theta*) + N(0, noise^2))``.

    In-memory targets are exact; on disk inputs are 8-bit PNG (lossless by
    construction), targets 16-bit PNG, plus ``theta_star.txt`` and a
    ``pairs.tsv`` manifest.  ``theta_star=None`` plants a random matrix.
    """
    if k < 1:
        raise ValueError("corpus needs at least one image")
    ss = np.random.SeedSequence(seed)
    theta_rng, image_rng, noise_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    theta = planted_theta(theta_rng) if theta_star is None else np.asarray(theta_star, dtype=np.float64)
    ids = [f"img{i:04d}" for i in range(k)]
    inputs, targets = [], []
    for _ in range(k):
        x = procedural_image(image_rng, size)
        y = apply_transform_unclamped(x, theta)
        if noise > 0:
            y = y + noise * noise_rng.standard_normal(y.shape)
        inputs.append(x)
        targets.append(np.clip(y, 0.0, 1.0))
    corpus = SyntheticCorpus(ids, inputs, targets, theta)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for ident, x, y in zip(ids, inputs, targets):
            ip, tp = out / f"{ident}_in.png", out / f"{ident}_target.png"
            save_image(x, ip)
            save_image(y, tp, bits=16)
            corpus.input_paths.append(ip)
            corpus.target_paths.append(tp)
        save_theta(theta, out / "theta_star.txt")
        corpus.manifest = out / "pairs.tsv"
        write_pair_manifest(corpus.manifest, [p.name for p in corpus.input_paths],
                            [p.name for p in corpus.target_paths])
    return corpus


def write_pair_manifest(path, inputs, targets) -> None:
    with open(path, "w") as fh:
        for a, b in zip(inputs, targets):
            fh.write(f"{a}\t{b}\n")


def read_pair_manifest(path):
    """List of (input path, target path); relative paths resolve against the manifest's folder."""
    base = Path(path).parent
    pairs = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{n}: expected 'input<TAB>target'")
            pairs.append(tuple(p if Path(p).is_absolute() else str(base / p) for p in parts))
    if not pairs:
        raise ValueError(f"{path}: manifest is empty")
    return pairs


def read_path_list(path):
    base = Path(path).parent
    with open(path) as fh:
        items = [line.strip() for line in fh if line.strip()]
    if not items:
        raise ValueError(f"{path}: list is empty")
    return [p if Path(p).is_absolute() else str(base / p) for p in items]


def load_pairs(pairs):
    return [load_image(a) for a, _ in pairs], [load_image(b) for _, b in pairs]
