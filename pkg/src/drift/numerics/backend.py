"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
used otherwise. `DRIFT_BACKEND=py` forces the fallback, `DRIFT_BACKEND=cy`
requires the extension. Both backends implement the same five entry points
with identical semantics (padding, stride, first-max ties).
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError
from ..util import thread_count
from . import _kernels_np

try:
    from . import _kernels as _ext
except ImportError:  # pragma: no cover - build-dependent
    _ext = None

_choice = os.environ.get("DRIFT_BACKEND", "").lower()
if _choice == "py":
    _ext = None
elif _choice == "cy" and _ext is None:
    raise ConfigError("DRIFT_BACKEND=cy but the compiled extension is not built")
elif _choice not in ("", "py", "cy"):
    raise ConfigError(f"unknown DRIFT_BACKEND value: {_choice!r}")


def backend_name() -> str:
    return "compiled" if _ext is not None else "numpy"


_THREADS = thread_count()


def _contig(a):
    return a if a.flags.c_contiguous else np.ascontiguousarray(a)


def _pad(x, pad, value=0.0):
    if pad == 0:
        return _contig(x)
    xp = np.full((x.shape[0], x.shape[1], x.shape[2] + 2 * pad), value, dtype=x.dtype)
    xp[:, :, pad:-pad] = x
    return xp


def conv1d_fwd(x, w, b, stride, pad):
    if _ext is None:
        return _kernels_np.conv1d_fwd(x, w, b, stride, pad)
    xp = _pad(x, pad)
    lo = (x.shape[2] + 2 * pad - w.shape[2]) // stride + 1
    out = np.empty((x.shape[0], w.shape[0], lo), dtype=x.dtype)
    _ext.conv1d_fwd(xp, w, b, stride, out, _THREADS)
    return out


def conv1d_bwd_x(gy, w, stride, pad, input_len):
    if _ext is None:
        return _kernels_np.conv1d_bwd_x(gy, w, stride, pad, input_len)
    gxp = np.zeros((gy.shape[0], w.shape[1], input_len + 2 * pad), dtype=gy.dtype)
    _ext.conv1d_bwd_x(_contig(gy), w, stride, gxp, _THREADS)
    if pad:
        gxp = np.ascontiguousarray(gxp[:, :, pad:-pad])
    return gxp


def conv1d_bwd_w(gy, x, stride, pad, kernel_len):
    if _ext is None:
        return _kernels_np.conv1d_bwd_w(gy, x, stride, pad, kernel_len)
    gw = np.zeros((gy.shape[1], x.shape[1], kernel_len), dtype=gy.dtype)
    gb = np.zeros(gy.shape[1], dtype=gy.dtype)
    _ext.conv1d_bwd_w(_contig(gy), _pad(x, pad), stride, gw, gb, _THREADS)
    return gw, gb


def maxpool1d_fwd(x, k, stride, pad):
    if _ext is None:
        return _kernels_np.maxpool1d_fwd(x, k, stride, pad)
    xp = _pad(x, pad, value=-np.inf) if pad else _contig(x)
    lo = (x.shape[2] + 2 * pad - k) // stride + 1
    out = np.empty((x.shape[0], x.shape[1], lo), dtype=x.dtype)
    idx = np.empty(out.shape, dtype=np.int32)
    _ext.maxpool1d_fwd(xp, k, stride, out, idx, _THREADS)
    return out, idx


def maxpool1d_bwd(gy, idx, k, stride, pad, input_len):
    if _ext is None:
        return _kernels_np.maxpool1d_bwd(gy, idx, k, stride, pad, input_len)
    gxp = np.zeros((gy.shape[0], gy.shape[1], input_len + 2 * pad), dtype=gy.dtype)
    _ext.maxpool1d_bwd(_contig(gy), idx, stride, gxp, _THREADS)
    if pad:
        gxp = np.ascontiguousarray(gxp[:, :, pad:-pad])
    return gxp
