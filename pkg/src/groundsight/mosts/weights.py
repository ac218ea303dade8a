"""Flat weight bundles: 8-byte little-endian header length, a JSON header
listing ``{name, shape, dtype, offset}`` per tensor, then raw little-endian
tensor bytes (offsets are relative to the start of the data block)."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def save_weights(path, weights: dict) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(weights):
        arr = np.asarray(weights[name])
        dt = str(arr.dtype)
        if dt not in _DTYPES:
            raise ValueError(f"{name}: unsupported dtype {dt}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[dt]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dt, "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_weights(path) -> dict:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FormatError(f"{path}: too short for a weight bundle")
    (hlen,) = struct.unpack("<Q", data[:8])
    if 8 + hlen > len(data):
        raise FormatError(f"{path}: header length {hlen} exceeds file size")
    try:
        header = json.loads(data[8 : 8 + hlen].decode("utf-8"))
        entries = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: bad weight header ({exc})") from None
    body = memoryview(data)[8 + hlen :]
    out = {}
    for e in entries:
        dt = _DTYPES.get(e.get("dtype"))
        if dt is None:
            raise FormatError(f"{path}: tensor {e.get('name')} has unsupported dtype {e.get('dtype')}")
        shape = tuple(int(v) for v in e["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = int(e["offset"])
        end = start + count * np.dtype(dt).itemsize
        if start < 0 or end > len(body):
            raise FormatError(f"{path}: tensor {e['name']} runs past the end of the file")
        out[e["name"]] = np.frombuffer(body[start:end], dtype=dt).astype(e["dtype"]).reshape(shape)
    return out
