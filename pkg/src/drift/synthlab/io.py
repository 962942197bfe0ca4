"""Dataset container: "DRIFTDS1" magic header + fixed-size records, with a
JSON sidecar carrying the full generator config for provenance.

Record layout (little-endian): y u16, d u16, then 2*L float32 (I row then
Q row). Header: magic, version u32, K u32, M u32, L u32, count u32.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InputOutputError
from ..util import atomic_write_bytes
from .dataset import Dataset

MAGIC = b"DRIFTDS1"
VERSION = 1
_HEADER = struct.Struct("<8sIIIII")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_dataset(path, ds: Dataset, config_dict: dict) -> None:
    L = ds.frame_len
    rec = np.zeros(len(ds), dtype=np.dtype([("y", "<u2"), ("d", "<u2"), ("x", "<f4", (2, L))]))
    rec["y"] = ds.y
    rec["d"] = ds.d
    rec["x"] = ds.x
    header = _HEADER.pack(MAGIC, VERSION, ds.k_tx, ds.m_rx, L, len(ds))
    atomic_write_bytes(path, header + rec.tobytes())
    atomic_write_bytes(sidecar_path(path), json.dumps(config_dict, sort_keys=True, indent=2).encode())


def load_dataset(path) -> Dataset:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise InputOutputError(f"dataset not found: {path}") from e
    if len(blob) < _HEADER.size:
        raise FormatError(f"truncated dataset header: {path}")
    magic, version, k, m, L, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"not a dataset file: {path}")
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version} in {path}")
    rec_dtype = np.dtype([("y", "<u2"), ("d", "<u2"), ("x", "<f4", (2, L))])
    expected = _HEADER.size + count * rec_dtype.itemsize
    if len(blob) != expected:
        raise FormatError(f"dataset size mismatch in {path}: {len(blob)} != {expected}")
    rec = np.frombuffer(blob, dtype=rec_dtype, count=count, offset=_HEADER.size)
    return Dataset(
        x=rec["x"].astype(np.float32),
        y=rec["y"].astype(np.uint16),
        d=rec["d"].astype(np.uint16),
        uid=np.arange(count, dtype=np.int64),
        k_tx=k,
        m_rx=m,
    )


def load_sidecar(path) -> dict:
    sc = sidecar_path(path)
    try:
        return json.loads(sc.read_text())
    except OSError as e:
        raise InputOutputError(f"dataset sidecar not found: {sc}") from e
