"""Image files, resizing, cropping and right-angle augmentations.

Images are ``H x W x 3`` float arrays in [0, 1].  Codecs: PNG (8/16-bit RGB,
via pypng) and binary PPM (P6), selected by file extension.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import png

SUPPORTED_EXTENSIONS = (".png", ".ppm")


class ImageError(Exception):
    """Base class for image file problems."""


class UnsupportedFormatError(ImageError):
    pass


class CorruptImageError(ImageError):
    pass


class AlphaChannelError(ImageError):
    pass


def _codec(path) -> str:
    ext = Path(path).suffix.lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise UnsupportedFormatError(f"unsupported image extension {ext!r} for {path}")
    return ext


def _read_ppm(data: bytes):
    # header: P6 <ws> width <ws> height <ws> maxval <single ws> raster
    if not data.startswith(b"P6"):
        raise UnsupportedFormatError("only binary PPM (P6) is supported")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise CorruptImageError("malformed PPM header")
        fields.append(int(data[start:pos]))
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise CorruptImageError(f"invalid PPM header values {fields}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * 3
    raster = data[pos : pos + count * dtype.itemsize]
    if len(raster) < count * dtype.itemsize:
        raise CorruptImageError(f"PPM raster truncated: {len(raster)} of {count * dtype.itemsize} bytes")
    samples = np.frombuffer(raster, dtype=dtype)
    return samples.reshape(height, width, 3).astype(np.float64) / maxval


def _read_png(path):
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        if info.get("alpha"):
            raise AlphaChannelError(f"{path}: alpha channels are not supported")
        if info.get("greyscale") or info["planes"] != 3:
            raise UnsupportedFormatError(f"{path}: only RGB PNG images are supported")
        bitdepth = info["bitdepth"]
        if bitdepth not in (8, 16):
            raise UnsupportedFormatError(f"{path}: unsupported PNG bit depth {bitdepth}")
        arr = np.array([np.asarray(r) for r in rows], dtype=np.float64)
    except png.FormatError as exc:
        raise CorruptImageError(f"{path}: {exc}") from None
    except (png.ChunkError, EOFError, ValueError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CorruptImageError(f"{path}: {exc}") from None
    return arr.reshape(height, width, 3) / (2**bitdepth - 1)


def load_image(path):
    """Read an RGB image and normalise samples to [0, 1] (float64)."""
    ext = _codec(path)
    if ext == ".ppm":
        with open(path, "rb") as fh:
            return _read_ppm(fh.read())
    return _read_png(path)


def quantize(img, bits: int = 8):
    """Clamp and round half-up to integer samples."""
    top = 2**bits - 1
    q = np.floor(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * top + 0.5)
    return q.astype(np.uint16 if bits > 8 else np.uint8)


def save_image(img, path, bits: int = 8) -> None:
    """Write an 8-bit (or 16-bit, PNG only) RGB file chosen by extension."""
    ext = _codec(path)
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {img.shape}")
    q = quantize(img, bits)
    h, w, _ = q.shape
    if ext == ".ppm":
        if bits != 8:
            raise UnsupportedFormatError("PPM output is 8-bit only")
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (w, h))
            fh.write(q.tobytes())
        return
    writer = png.Writer(width=w, height=h, greyscale=False, bitdepth=bits)
    with open(path, "wb") as fh:
        writer.write(fh, q.reshape(h, w * 3))


def list_images(directory):
    """Supported image files in a directory, lexicographic order."""
    return sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS
    )


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centres: src = (dst + 0.5) * n_in / n_out - 0.5
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img, out_h: int, out_w: int):
    """Bilinear resampling with half-pixel-centred sample positions."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be positive")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    y0, y1, fy = _bilinear_axis(h, out_h)
    x0, x1, fx = _bilinear_axis(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def crop(img, top: int, left: int, h: int, w: int):
    img = np.asarray(img)
    H, W = img.shape[:2]
    if h < 1 or w < 1 or top < 0 or left < 0 or top + h > H or left + w > W:
        raise IndexError(f"crop ({top}, {left}, {h}, {w}) outside {H}x{W} image")
    return img[top : top + h, left : left + w].copy()


def sample_augmentation(rng: np.random.Generator):
    """Draw (quarter_turns, vertical_flip) uniformly from the 8 outcomes."""
    quarter_turns = int(rng.integers(4))
    flip = bool(rng.integers(2))
    return quarter_turns, flip


def apply_augmentation(img, quarter_turns: int, flip: bool):
    img = np.asarray(img)
    if quarter_turns % 2 and img.shape[0] != img.shape[1]:
        raise ValueError("90/270 degree rotations need a square image")
    out = np.rot90(img, k=quarter_turns, axes=(0, 1))
    if flip:
        out = out[::-1]
    return np.ascontiguousarray(out)


def augment(img, rng: np.random.Generator):
    """Random right-angle rotation composed with a 50% vertical flip."""
    img = np.asarray(img)
    if img.shape[0] != img.shape[1]:
        raise ValueError("augmentation is only defined for square training tiles")
    return apply_augmentation(img, *sample_augmentation(rng))


def is_image_path(path: str | os.PathLike) -> bool:
    return Path(path).suffix.lower() in SUPPORTED_EXTENSIONS
