"""Evaluation metrics: mean CIELab L2, PSNR and SSIM (RGB), and report export."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .color import mean_lab_l2

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; zero error returns ``cap``."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * np.log10(1.0 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


def _filter_valid(img, w):
    pad = len(w) // 2
    out = correlate1d(correlate1d(img, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return out[pad:-pad, pad:-pad]


def ssim(a, b) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over channels."""
    a, b = _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[:2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mx, my = _filter_valid(x, w), _filter_valid(y, w)
        sxx = _filter_valid(x * x, w) - mx * mx
        syy = _filter_valid(y * y, w) - my * my
        sxy = _filter_valid(x * y, w) - mx * my
        num = (2 * (mx * my) + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


@dataclass
class EvalReport:
    mean_lab_l2: float
    psnr_db: float
    ssim: float
    per_image_rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "mean_lab_l2", "psnr_db", "ssim"])
        for row in self.per_image_rows:
            writer.writerow([row[0], *(repr(float(v)) for v in row[1:])])
        writer.writerow(["MEAN", repr(self.mean_lab_l2), repr(self.psnr_db), repr(self.ssim)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def table(self) -> str:
        width = max([len(str(r[0])) for r in self.per_image_rows] + [4])
        lines = [f"{'id':<{width}}  {'mean_L2':>9}  {'PSNR':>7}  {'SSIM':>6}"]
        for ident, l2, p, s in self.per_image_rows:
            lines.append(f"{str(ident):<{width}}  {l2:9.4f}  {p:7.3f}  {s:6.4f}")
        lines.append(f"{'MEAN':<{width}}  {self.mean_lab_l2:9.4f}  {self.psnr_db:7.3f}  {self.ssim:6.4f}")
        return "\n".join(lines)


def evaluate_image(output, target):
    return mean_lab_l2(output, target), psnr(output, target), ssim(output, target)


def evaluate_pairs(pairs, ids=None) -> EvalReport:
    """Per-image metric triple plus arithmetic means, in input order.

    ``pairs`` holds (output, target) images; ``ids`` defaults to 0..n-1.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("evaluate_pairs needs at least one pair")
    ids = list(range(len(pairs))) if ids is None else list(ids)
    if len(ids) != len(pairs):
        raise ValueError("ids and pairs differ in length")
    rows = [(ident, *evaluate_image(out, tgt)) for ident, (out, tgt) in zip(ids, pairs)]
    means = np.mean(np.array([r[1:] for r in rows]), axis=0)
    return EvalReport(float(means[0]), float(means[1]), float(means[2]), rows)
