"""Dense tensors, a recording tape, and the differentiable op set.

The tape records every executed op in order; `backward` replays the records
in reverse, accumulating adjoints additively across fan-out. Ops run
forward-only when no tape is active (inference mode). Values are plain numpy
arrays; float32 is the training dtype and float64 is used by the
verification suite (ops inherit the dtype of their inputs).
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import DegenerateBatchError, LabelError, ShapeError, UsageError
from ..util import debug_checks_enabled
from . import backend


class Tensor:
    __slots__ = ("data",)

    def __init__(self, data, dtype=None):
        self.data = np.asarray(data, dtype=dtype)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """Named leaf tensor updated by the optimizer."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, dtype)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


_active = threading.local()


class Tape:
    """Ordered record of executed ops for one forward pass (single thread)."""

    def __init__(self):
        self._records = []  # (out_id, input_ids, backward_fn)
        self._node_ids: dict[int, int] = {}
        self._tensors: list[Tensor] = []
        self.grl_count = 0

    @staticmethod
    def current() -> "Tape | None":
        return getattr(_active, "tape", None)

    def __enter__(self):
        if Tape.current() is not None:
            raise UsageError("tapes do not nest")
        _active.tape = self
        return self

    def __exit__(self, *exc):
        _active.tape = None
        return False

    def _node(self, t: Tensor) -> int:
        nid = self._node_ids.get(id(t))
        if nid is None:
            nid = len(self._tensors)
            self._node_ids[id(t)] = nid
            self._tensors.append(t)
        return nid

    def record(self, out: Tensor, inputs, backward_fn) -> None:
        in_ids = [self._node(t) for t in inputs]
        self._records.append((self._node(out), in_ids, backward_fn))

    def parameters(self) -> dict[str, Parameter]:
        seen = {}
        for t in self._tensors:
            if isinstance(t, Parameter):
                seen[t.name] = t
        return seen

    def backward(self, loss: Tensor, params=None) -> dict[str, np.ndarray]:
        """Reverse-mode gradients of a scalar `loss` recorded on this tape.

        Returns {parameter name: gradient array}; when `params` is given,
        parameters without a path to the loss get explicit zeros.
        """
        if loss.data.ndim != 0:
            raise UsageError("backward root must be a scalar")
        loss_id = self._node_ids.get(id(loss))
        if loss_id is None:
            raise UsageError("loss tensor was not produced on this tape")
        grads: dict[int, np.ndarray] = {loss_id: np.ones((), dtype=loss.dtype)}
        for out_id, in_ids, fn in reversed(self._records):
            g_out = grads.get(out_id)
            if g_out is None:
                continue
            for in_id, g in zip(in_ids, fn(g_out)):
                if g is None:
                    continue
                acc = grads.get(in_id)
                grads[in_id] = g if acc is None else acc + g
        out: dict[str, np.ndarray] = {}
        for name, p in self.parameters().items():
            g = grads.get(self._node_ids[id(p)])
            out[name] = np.zeros_like(p.data) if g is None else g
        if params is not None:
            for p in params:
                if p.name not in out:
                    out[p.name] = np.zeros_like(p.data)
        return out


def _emit(out_data, inputs, backward_fn) -> Tensor:
    if debug_checks_enabled() and not np.all(np.isfinite(out_data)):
        raise UsageError("non-finite values in op output")
    out = Tensor(out_data)
    tape = Tape.current()
    if tape is not None:
        tape.record(out, inputs, backward_fn)
    return out


def _check_dtype(*tensors):
    dt = tensors[0].dtype
    for t in tensors[1:]:
        if t.dtype != dt:
            raise ShapeError(f"mixed dtypes: {dt} vs {t.dtype}")
    return dt


# ---------------------------------------------------------------- layers


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of [B,Cin,L] with [Cout,Cin,k] plus bias."""
    _check_dtype(x, w, b)
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ShapeError("conv1d expects x[B,Cin,L], w[Cout,Cin,k]")
    B, cin, L = x.shape
    cout, cin_w, k = w.shape
    if cin != cin_w or b.shape != (cout,):
        raise ShapeError(f"conv1d channel mismatch: x has {cin}, w has {cin_w}")
    if stride < 1 or k > L + 2 * pad:
        raise ShapeError("conv1d: stride >= 1 and k <= L + 2*pad required")
    y = backend.conv1d_fwd(x.data, w.data, b.data, stride, pad)
    xd, wd = x.data, w.data

    def bwd(gy):
        gx = backend.conv1d_bwd_x(gy, wd, stride, pad, L)
        gw, gb = backend.conv1d_bwd_w(gy, xd, stride, pad, k)
        return gx, gw, gb

    return _emit(y, (x, w, b), bwd)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map x @ w.T + b for x[B,n], w[m,n], b[m]."""
    _check_dtype(x, w, b)
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"dense mismatch: x{x.shape} w{w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"dense bias shape {b.shape} != ({w.shape[0]},)")
    y = x.data @ w.data.T + b.data
    xd, wd = x.data, w.data

    def bwd(gy):
        return gy @ wd, gy.T @ xd, gy.sum(axis=0)

    return _emit(y, (x, w, b), bwd)


def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor, state, training: bool) -> Tensor:
    """Per-channel normalization of [B,C,L]; `state` holds running stats.

    Train mode normalizes with batch statistics and updates the running
    stats in place (momentum `state.momentum`); eval mode uses the stored
    stats. Variance floor is state.eps.
    """
    _check_dtype(x, gamma, beta)
    if x.data.ndim != 3:
        raise ShapeError("batchnorm1d expects [B,C,L]")
    B, C, L = x.shape
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError("batchnorm1d affine shape mismatch")
    eps = x.dtype.type(state.eps)
    xd = x.data
    if training:
        n = B * L
        if n < 2:
            raise DegenerateBatchError("batchnorm1d needs B*L >= 2 in train mode")
        mean = xd.mean(axis=(0, 2))
        centered = xd - mean[:, None]
        var = (centered * centered).mean(axis=(0, 2))
        state.update(mean, var, n)
    else:
        mean = state.running_mean.astype(xd.dtype)
        var = state.running_var.astype(xd.dtype)
        centered = xd - mean[:, None]
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv[:, None]
    y = gamma.data[:, None] * xhat + beta.data[:, None]

    def bwd(gy):
        gbeta = gy.sum(axis=(0, 2))
        ggamma = (gy * xhat).sum(axis=(0, 2))
        if training:
            n = B * L
            gx = (gamma.data * inv)[:, None] * (
                gy
                - (gbeta / n)[:, None]
                - xhat * (ggamma / n)[:, None]
            )
        else:
            gx = gy * (gamma.data * inv)[:, None]
        return gx, ggamma, gbeta

    return _emit(y, (x, gamma, beta), bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient 0 at the kink
    return _emit(np.where(mask, x.data, x.dtype.type(0)), (x,), lambda gy: (gy * mask,))


def add(x: Tensor, y: Tensor) -> Tensor:
    _check_dtype(x, y)
    if x.shape != y.shape:
        raise ShapeError(f"add shape mismatch: {x.shape} vs {y.shape}")
    return _emit(x.data + y.data, (x, y), lambda gy: (gy, gy))


def global_avg_pool(x: Tensor) -> Tensor:
    """[B,C,L] -> [B,C] mean over the length axis."""
    if x.data.ndim != 3:
        raise ShapeError("global_avg_pool expects [B,C,L]")
    L = x.shape[2]
    y = x.data.mean(axis=2)

    def bwd(gy):
        return (np.repeat(gy[:, :, None] / gy.dtype.type(L), L, axis=2),)

    return _emit(y, (x,), bwd)


def max_pool1d(x: Tensor, k: int, stride: int, pad: int = 0) -> Tensor:
    """Windowed max over the length axis; ties route to the first maximum."""
    if x.data.ndim != 3:
        raise ShapeError("max_pool1d expects [B,C,L]")
    L = x.shape[2]
    if k > L + 2 * pad or stride < 1:
        raise ShapeError("max_pool1d: k <= L + 2*pad and stride >= 1 required")
    y, idx = backend.maxpool1d_fwd(x.data, k, stride, pad)

    def bwd(gy):
        return (backend.maxpool1d_bwd(gy, idx, k, stride, pad, L),)

    return _emit(y, (x,), bwd)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Column slice of [B,F]; gradient lands only in the sliced columns."""
    if x.data.ndim != 2:
        raise ShapeError("slice_cols expects [B,F]")
    y = np.ascontiguousarray(x.data[:, start:stop])

    def bwd(gy):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = gy
        return (gx,)

    return _emit(y, (x,), bwd)


def grl(x: Tensor, lam: float) -> Tensor:
    """Gradient reversal: identity forward, -lam * upstream backward."""
    if lam < 0:
        raise UsageError("grl coefficient must be nonnegative")
    lam_t = x.dtype.type(lam)
    out = Tensor(x.data)  # shares the buffer: forward is bit-identical
    tape = Tape.current()
    if tape is not None:
        tape.grl_count += 1
        tape.record(out, (x,), lambda gy: (-lam_t * gy,))
    return out


# ---------------------------------------------------------------- losses


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray):
    """Batch-mean -log softmax probability of the label class.

    Returns (scalar loss, probability matrix). Labels are 0-based ints.
    """
    if logits.data.ndim != 2:
        raise ShapeError("softmax_cross_entropy expects [B,K] logits")
    B, K = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (B,):
        raise ShapeError(f"labels shape {labels.shape} != ({B},)")
    if labels.min() < 0 or labels.max() >= K:
        raise LabelError(f"labels outside [0,{K})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    probs = np.exp(logp)
    loss = -logp[np.arange(B), labels].mean()

    def bwd(gy):
        g = probs.copy()
        g[np.arange(B), labels] -= 1
        return (g * (gy / gy.dtype.type(B)),)

    return _emit(np.asarray(loss, dtype=logits.dtype), (logits,), bwd), probs


def center_loss(z: Tensor, domains: np.ndarray, detach_centroids: bool = False) -> Tensor:
    """Sum over batch domains of the mean squared distance to the domain
    centroid; centroids are computed inside the batch.

    Differentiating through the centroid or detaching it gives the same
    gradient: within a domain sum_i (z_i - c) = 0, so the centroid's own
    contribution cancels exactly. The flag is kept for configurability.
    """
    if z.data.ndim != 2:
        raise ShapeError("center_loss expects [B,F]")
    domains = np.asarray(domains)
    if domains.shape != (z.shape[0],):
        raise ShapeError("domain labels must match the batch")
    zd = z.data
    diff = np.empty_like(zd)
    total = zd.dtype.type(0)
    counts = np.empty(z.shape[0], dtype=zd.dtype)
    for d in np.unique(domains):
        sel = domains == d
        c = zd[sel].mean(axis=0)
        dv = zd[sel] - c
        diff[sel] = dv
        counts[sel] = sel.sum()
        total = total + (dv * dv).sum() / zd.dtype.type(sel.sum())

    def bwd(gy):
        # (2/|S_d|)(z_i - c_d); identical with detached centroids (see above)
        return (gy * 2.0 * diff / counts[:, None],)

    return _emit(np.asarray(total, dtype=zd.dtype), (z,), bwd)


def separation_loss(z_a: Tensor, z_b: Tensor) -> Tensor:
    """Negated mean squared distance between paired rows of [B,F]."""
    _check_dtype(z_a, z_b)
    if z_a.shape != z_b.shape or z_a.data.ndim != 2:
        raise ShapeError("separation_loss expects matching [B,F] inputs")
    B = z_a.shape[0]
    d = z_a.data - z_b.data
    loss = -(d * d).sum() / z_a.dtype.type(B)

    def bwd(gy):
        g = gy * 2.0 * d / z_a.dtype.type(B)
        return -g, g

    return _emit(np.asarray(loss, dtype=z_a.dtype), (z_a, z_b), bwd)


def weighted_sum(terms, weights) -> Tensor:
    """Left-to-right fold sum(w_i * t_i) of scalar tensors; the summation
    order is fixed so the result is bit-reproducible."""
    if len(terms) != len(weights) or not terms:
        raise UsageError("weighted_sum needs matching nonempty terms/weights")
    dt = _check_dtype(*terms)
    ws = [dt.type(w) for w in weights]
    acc = ws[0] * terms[0].data
    for t, w in zip(terms[1:], ws[1:]):
        acc = acc + w * t.data

    def bwd(gy):
        return tuple(gy * w for w in ws)

    return _emit(np.asarray(acc, dtype=dt), tuple(terms), bwd)
