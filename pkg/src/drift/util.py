"""Shared plumbing: seeded substreams, canonical hashing, atomic writes."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

# Substream tags keep independent random purposes from colliding under one
# user-facing seed.
STREAM_TX_PROFILE = 1
STREAM_RX_PROFILE = 2
STREAM_FRAME = 3
STREAM_BATCH = 4
STREAM_INIT = 5
STREAM_PROBE = 6


def substream(*key: int) -> np.random.Generator:
    """Independent PCG64 stream derived from an integer key tuple.

    The same key always yields the same stream, so any consumer (dataset
    sample, epoch shuffle, weight init) can be regenerated in isolation.
    """
    return np.random.default_rng(list(key))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_json(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def thread_count() -> int:
    """Kernel parallelism cap; DRIFT_THREADS overrides the core count."""
    env = os.environ.get("DRIFT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def debug_checks_enabled() -> bool:
    return os.environ.get("DRIFT_DEBUG", "") not in ("", "0")
