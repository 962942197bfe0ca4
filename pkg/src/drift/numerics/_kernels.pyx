# cython: language_level=3
"""Compiled conv/pool kernels.

Direct convolution over pre-padded contiguous buffers, two loop orders:

* wide path (long output length): per-weight axpy over the length axis,
  specialized for unit stride so the inner loops vectorize;
* deep path (short output length, many channels): pack the receptive-field
  patch once per output position, then run contiguous dot/axpy loops of
  length C_in*k across output channels.

Threading (when enabled) only splits loops whose iterations write disjoint
output elements, and every element is reduced in a fixed order, so results
are bit-identical for any thread count. The deep path is serial.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdlib cimport free, malloc

ctypedef fused floating:
    float
    double

# below this output length the patch-packing loop order wins
DEF DEEP_LO_CUTOFF = 32


cdef inline void _axpy_conv(floating wv, const floating* x, floating* y,
                            Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t l
    if stride == 1:
        for l in range(n):
            y[l] += wv * x[l]
    else:
        for l in range(n):
            y[l] += wv * x[l * stride]


cdef inline void _axpy_scatter(floating wv, const floating* g, floating* y,
                               Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t l
    if stride == 1:
        for l in range(n):
            y[l] += wv * g[l]
    else:
        for l in range(n):
            y[l * stride] += wv * g[l]


cdef inline floating _dot_conv(const floating* g, const floating* x,
                               Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t l
    cdef floating acc = 0
    if stride == 1:
        for l in range(n):
            acc += g[l] * x[l]
    else:
        for l in range(n):
            acc += g[l] * x[l * stride]
    return acc


cdef inline void _pack_patch(const floating[:, :, ::1] xp, Py_ssize_t bi,
                             Py_ssize_t start, Py_ssize_t ci, Py_ssize_t k,
                             floating* patch) noexcept nogil:
    cdef Py_ssize_t c, j, p = 0
    cdef const floating* xrow
    for c in range(ci):
        xrow = &xp[bi, c, start]
        for j in range(k):
            patch[p] = xrow[j]
            p += 1


def conv1d_fwd(floating[:, :, ::1] xp, floating[:, :, ::1] w, floating[::1] b,
               int stride, floating[:, :, ::1] out, int threads):
    cdef Py_ssize_t B = xp.shape[0], ci = xp.shape[1]
    cdef Py_ssize_t co = w.shape[0], k = w.shape[2], lo = out.shape[2]
    cdef Py_ssize_t ck = ci * k
    cdef Py_ssize_t bi, o, c, j, l, p
    cdef const floating* xrow
    cdef const floating* wrow
    cdef floating* orow
    cdef floating* patch
    cdef floating acc
    if lo >= DEEP_LO_CUTOFF or ck < 2 * lo:
        for bi in prange(B, nogil=True, schedule="static", num_threads=threads):
            for o in range(co):
                orow = &out[bi, o, 0]
                for l in range(lo):
                    orow[l] = b[o]
                for c in range(ci):
                    xrow = &xp[bi, c, 0]
                    for j in range(k):
                        _axpy_conv(w[o, c, j], xrow + j, orow, lo, stride)
    else:
        with nogil:
            patch = <floating*> malloc(ck * sizeof(floating))
            for bi in range(B):
                for l in range(lo):
                    _pack_patch(xp, bi, l * stride, ci, k, patch)
                    for o in range(co):
                        wrow = &w[o, 0, 0]
                        acc = b[o]
                        for p in range(ck):
                            acc = acc + wrow[p] * patch[p]
                        out[bi, o, l] = acc
            free(patch)


def conv1d_bwd_x(floating[:, :, ::1] gy, floating[:, :, ::1] w,
                 int stride, floating[:, :, ::1] gxp, int threads):
    cdef Py_ssize_t B = gy.shape[0], co = gy.shape[1], lo = gy.shape[2]
    cdef Py_ssize_t ci = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t ck = ci * k
    cdef Py_ssize_t bi, o, c, j, l, p
    cdef const floating* gyrow
    cdef const floating* wrow
    cdef floating* grow
    cdef floating* patch
    cdef floating g
    if lo >= DEEP_LO_CUTOFF or ck < 2 * lo:
        for bi in prange(B, nogil=True, schedule="static", num_threads=threads):
            for c in range(ci):
                grow = &gxp[bi, c, 0]
                for o in range(co):
                    gyrow = &gy[bi, o, 0]
                    for j in range(k):
                        _axpy_scatter(w[o, c, j], gyrow, grow + j, lo, stride)
    else:
        with nogil:
            patch = <floating*> malloc(ck * sizeof(floating))
            for bi in range(B):
                for l in range(lo):
                    for p in range(ck):
                        patch[p] = 0
                    for o in range(co):
                        g = gy[bi, o, l]
                        wrow = &w[o, 0, 0]
                        for p in range(ck):
                            patch[p] += g * wrow[p]
                    p = 0
                    for c in range(ci):
                        grow = &gxp[bi, c, l * stride]
                        for j in range(k):
                            grow[j] += patch[p]
                            p += 1
            free(patch)


def conv1d_bwd_w(floating[:, :, ::1] gy, floating[:, :, ::1] xp,
                 int stride, floating[:, :, ::1] gw, floating[::1] gb,
                 int threads):
    """gw and gb must arrive zero-initialized."""
    cdef Py_ssize_t B = gy.shape[0], co = gy.shape[1], lo = gy.shape[2]
    cdef Py_ssize_t ci = xp.shape[1], k = gw.shape[2]
    cdef Py_ssize_t ck = ci * k
    cdef Py_ssize_t bi, o, c, j, l, p
    cdef floating acc, g
    cdef floating* patch
    cdef floating* gwrow
    if lo >= DEEP_LO_CUTOFF or ck < 2 * lo:
        for o in prange(co, nogil=True, schedule="static", num_threads=threads):
            for c in range(ci):
                for j in range(k):
                    acc = 0
                    for bi in range(B):
                        acc = acc + _dot_conv(&gy[bi, o, 0], &xp[bi, c, j], lo, stride)
                    gw[o, c, j] = acc
            acc = 0
            for bi in range(B):
                for l in range(lo):
                    acc = acc + gy[bi, o, l]
            gb[o] = acc
    else:
        with nogil:
            patch = <floating*> malloc(ck * sizeof(floating))
            for bi in range(B):
                for l in range(lo):
                    _pack_patch(xp, bi, l * stride, ci, k, patch)
                    for o in range(co):
                        g = gy[bi, o, l]
                        gb[o] += g
                        gwrow = &gw[o, 0, 0]
                        for p in range(ck):
                            gwrow[p] += g * patch[p]
            free(patch)


def maxpool1d_fwd(floating[:, :, ::1] xp, int k, int stride,
                  floating[:, :, ::1] out, cnp.int32_t[:, :, ::1] idx,
                  int threads):
    cdef Py_ssize_t B = xp.shape[0], C = xp.shape[1], lo = out.shape[2]
    cdef Py_ssize_t bi, c, l, j, base, best_j
    cdef floating best, v
    for bi in prange(B, nogil=True, schedule="static", num_threads=threads):
        for c in range(C):
            for l in range(lo):
                base = l * stride
                best = xp[bi, c, base]
                best_j = 0
                for j in range(1, k):
                    v = xp[bi, c, base + j]
                    if v > best:  # strict: first maximum wins
                        best = v
                        best_j = j
                out[bi, c, l] = best
                idx[bi, c, l] = <cnp.int32_t> best_j


def maxpool1d_bwd(floating[:, :, ::1] gy, cnp.int32_t[:, :, ::1] idx,
                  int stride, floating[:, :, ::1] gxp, int threads):
    cdef Py_ssize_t B = gy.shape[0], C = gy.shape[1], lo = gy.shape[2]
    cdef Py_ssize_t bi, c, l, pos
    for bi in prange(B, nogil=True, schedule="static", num_threads=threads):
        for c in range(C):
            for l in range(lo):
                pos = l * stride + idx[bi, c, l]
                gxp[bi, c, pos] = gxp[bi, c, pos] + gy[bi, c, l]
