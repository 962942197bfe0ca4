"""Checkpoint container: "DRIFTCK1" magic, JSON manifest, raw LE payload.

The manifest lists every entry (name, shape, dtype, kind) in payload order
plus the model architecture, so evaluation can rebuild the network without
the original config file. Adam moments ride along when present.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ArchitectureMismatchError, FormatError, InputOutputError
from ..util import atomic_write_bytes
from .optim import AdamState

MAGIC = b"DRIFTCK1"
VERSION = 1


def _entries(params, buffers, adam):
    for name, p in params.items():
        yield name, p.data, "param"
    for name, buf in buffers.items():
        yield name, buf, "buffer"
    if adam is not None:
        for name in params:
            yield name, adam.m[name], "adam_m"
        for name in params:
            yield name, adam.v[name], "adam_v"


def save_checkpoint(path, arch: dict, params: dict, buffers: dict,
                    adam: AdamState | None = None, extra: dict | None = None) -> None:
    manifest = {
        "version": VERSION,
        "arch": arch,
        "extra": extra or {},
        "adam": None,
        "entries": [],
    }
    if adam is not None:
        for name in params:
            if name not in adam.m:
                adam.m[name] = np.zeros_like(params[name].data)
                adam.v[name] = np.zeros_like(params[name].data)
        manifest["adam"] = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                            "eps": adam.eps, "step": adam.step}
    chunks = []
    for name, arr, kind in _entries(params, buffers, adam):
        arr = np.ascontiguousarray(arr)
        manifest["entries"].append(
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.name, "kind": kind}
        )
        chunks.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    header = json.dumps(manifest, sort_keys=True).encode()
    payload = MAGIC + struct.pack("<I", len(header)) + header + b"".join(chunks)
    atomic_write_bytes(path, payload)


def load_checkpoint(path, expect_arch: dict | None = None):
    """Returns (arch, params, buffers, adam-or-None, extra).

    `params` maps name -> array (the caller wraps them into Parameters).
    Truncated or foreign files raise FormatError before any state is built.
    """
    try:
        blob = open(path, "rb").read()
    except OSError as e:
        raise InputOutputError(f"checkpoint not found: {path}") from e
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"not a checkpoint file: {path}")
    (hlen,) = struct.unpack_from("<I", blob, len(MAGIC))
    start = len(MAGIC) + 4
    if len(blob) < start + hlen:
        raise FormatError(f"truncated checkpoint header: {path}")
    manifest = json.loads(blob[start : start + hlen])
    if manifest.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version in {path}")
    if expect_arch is not None and manifest["arch"] != expect_arch:
        raise ArchitectureMismatchError(
            f"checkpoint architecture {manifest['arch']} does not match expected {expect_arch}"
        )
    offset = start + hlen
    arrays = []
    for ent in manifest["entries"]:
        dt = np.dtype(ent["dtype"]).newbyteorder("<")
        n = int(np.prod(ent["shape"], dtype=np.int64)) * dt.itemsize
        if len(blob) < offset + n:
            raise FormatError(f"truncated checkpoint payload: {path}")
        arr = np.frombuffer(blob, dtype=dt, count=int(np.prod(ent["shape"], dtype=np.int64)),
                            offset=offset).reshape(ent["shape"])
        arrays.append((ent, arr.astype(dt.newbyteorder("="), copy=True)))
        offset += n
    if offset != len(blob):
        raise FormatError(f"trailing bytes in checkpoint: {path}")
    params, buffers = {}, {}
    adam = None
    if manifest["adam"] is not None:
        a = manifest["adam"]
        adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"])
        adam.step = a["step"]
    for ent, arr in arrays:
        kind = ent["kind"]
        if kind == "param":
            params[ent["name"]] = arr
        elif kind == "buffer":
            buffers[ent["name"]] = arr
        elif kind == "adam_m":
            adam.m[ent["name"]] = arr
        elif kind == "adam_v":
            adam.v[ent["name"]] = arr
        else:
            raise FormatError(f"unknown entry kind {kind!r} in {path}")
    return manifest["arch"], params, buffers, adam, manifest["extra"]
