"""Binary model files.

Layout (little-endian): magic ``QENH``, uint32 format version, uint32 spec
length, UTF-8 JSON spec, uint8 training flag, uint32 entry count, then per
entry: uint16 key length, key, uint8 group (0 value / 1 buffer), uint32 element
count, float32 data.  Entries follow registry order.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .layers import buffer_shapes, param_shapes
from .network import ModelParams, NetworkSpec

MAGIC = b"QENH"
FORMAT_VERSION = 1


class ModelFormatError(Exception):
    pass


def _entries(spec: NetworkSpec, params: ModelParams):
    for path, layer in spec.layer_paths():
        for name in param_shapes(layer):
            yield f"{path}.{name}", 0, params.values[f"{path}.{name}"]
        for name in buffer_shapes(layer):
            yield f"{path}.{name}", 1, params.buffers[f"{path}.{name}"]


def dumps_model(spec: NetworkSpec, params: ModelParams) -> bytes:
    spec_bytes = json.dumps(spec.to_dict(), sort_keys=True).encode()
    entries = list(_entries(spec, params))
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(spec_bytes)), spec_bytes,
             struct.pack("<BI", int(params.training), len(entries))]
    for key, group, arr in entries:
        kb = key.encode()
        data = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(kb)) + kb + struct.pack("<BI", group, data.size))
        parts.append(data.tobytes())
    return b"".join(parts)


def loads_model(blob: bytes):
    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise ModelFormatError("model file is truncated")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    pos = 0
    if take(4) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version, spec_len = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"model format version {version} is not supported (expected {FORMAT_VERSION})")
    try:
        spec = NetworkSpec.from_dict(json.loads(take(spec_len).decode()))
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"invalid embedded network spec: {exc}") from None
    training, count = struct.unpack("<BI", take(5))
    params = ModelParams(training=bool(training))
    expected = dict(_expected_entries(spec))
    for _ in range(count):
        (klen,) = struct.unpack("<H", take(2))
        key = take(klen).decode()
        group, size = struct.unpack("<BI", take(5))
        data = np.frombuffer(take(4 * size), dtype="<f4").astype(np.float64)
        if key not in expected or expected[key][0] != group:
            raise ModelFormatError(f"unexpected entry {key!r}")
        shape = expected[key][1]
        if data.size != int(np.prod(shape)):
            raise ModelFormatError(f"entry {key!r} has {data.size} values, expected shape {shape}")
        (params.buffers if group else params.values)[key] = data.reshape(shape)
    if pos != len(blob):
        raise ModelFormatError("trailing bytes after the last entry")
    missing = set(expected) - set(params.values) - set(params.buffers)
    if missing:
        raise ModelFormatError(f"model file lacks entries: {sorted(missing)[:3]}")
    return spec, params


def _expected_entries(spec: NetworkSpec):
    for path, layer in spec.layer_paths():
        for name, shape in param_shapes(layer).items():
            yield f"{path}.{name}", (0, shape)
        for name, shape in buffer_shapes(layer).items():
            yield f"{path}.{name}", (1, shape)


def save_model(spec: NetworkSpec, params: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(spec, params))


def load_model(path):
    with open(path, "rb") as fh:
        return loads_model(fh.read())
