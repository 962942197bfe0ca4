"""Pure-numpy conv/pool kernels (im2col + BLAS GEMM).

Fallback used when the compiled extension is unavailable. Per-call results
are deterministic; accumulation order differs from the compiled kernels, so
the two backends agree only to floating-point tolerance, not bitwise.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad(x: np.ndarray, pad: int, value: float = 0.0) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad)), constant_values=value)


def _cols(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    # [B, C, Lp] -> contiguous [B, Lo, C, k]
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    return np.ascontiguousarray(win.transpose(0, 2, 1, 3))


def conv1d_fwd(x, w, b, stride, pad, threads=1):
    B, ci, _ = x.shape
    co, _, k = w.shape
    cols = _cols(_pad(x, pad), k, stride)
    lo = cols.shape[1]
    y = cols.reshape(B * lo, ci * k) @ w.reshape(co, ci * k).T
    y += b
    return np.ascontiguousarray(y.reshape(B, lo, co).transpose(0, 2, 1))


def conv1d_bwd_x(gy, w, stride, pad, input_len, threads=1):
    B, co, lo = gy.shape
    _, ci, k = w.shape
    gy2 = np.ascontiguousarray(gy.transpose(0, 2, 1)).reshape(B * lo, co)
    gcols = (gy2 @ w.reshape(co, ci * k)).reshape(B, lo, ci, k)
    gcols = gcols.transpose(0, 2, 1, 3)  # [B, ci, lo, k]
    gxp = np.zeros((B, ci, input_len + 2 * pad), dtype=gy.dtype)
    for j in range(k):
        gxp[:, :, j : j + stride * (lo - 1) + 1 : stride] += gcols[:, :, :, j]
    if pad:
        gxp = gxp[:, :, pad:-pad]
    return np.ascontiguousarray(gxp)


def conv1d_bwd_w(gy, x, stride, pad, kernel_len, threads=1):
    B, co, lo = gy.shape
    ci = x.shape[1]
    cols = _cols(_pad(x, pad), kernel_len, stride).reshape(B * lo, ci * kernel_len)
    gy2 = np.ascontiguousarray(gy.transpose(0, 2, 1)).reshape(B * lo, co)
    gw = (gy2.T @ cols).reshape(co, ci, kernel_len)
    gb = gy.sum(axis=(0, 2))
    return gw, gb


def maxpool1d_fwd(x, k, stride, pad, threads=1):
    xp = _pad(x, pad, value=-np.inf) if pad else x
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    idx = win.argmax(axis=3).astype(np.int32)  # first maximum wins
    y = np.take_along_axis(win, idx[..., None].astype(np.int64), axis=3)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool1d_bwd(gy, idx, k, stride, pad, input_len, threads=1):
    B, C, lo = gy.shape
    gxp = np.zeros((B, C, input_len + 2 * pad), dtype=gy.dtype)
    for j in range(k):
        gxp[:, :, j : j + stride * (lo - 1) + 1 : stride] += gy * (idx == j)
    if pad:
        gxp = gxp[:, :, pad:-pad]
    return np.ascontiguousarray(gxp)
