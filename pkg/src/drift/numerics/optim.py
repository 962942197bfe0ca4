"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


class AdamState:
    """Per-parameter first/second moments plus the step counter."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(state: AdamState, params, grads) -> None:
    """One Adam update over `params` (dict name -> Parameter) in place.

    Parameter iteration order is the registration order of the dict, and
    every operation is elementwise, so the update is deterministic.
    """
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != param {p.data.shape} ({name})")
        dt = p.data.dtype.type
        b1, b2 = dt(state.beta1), dt(state.beta2)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (dt(1) - b1) * g
        v *= b2
        v += (dt(1) - b2) * g * g
        mhat = m / dt(1 - state.beta1 ** t)
        vhat = v / dt(1 - state.beta2 ** t)
        p.data = p.data - dt(state.lr) * mhat / (np.sqrt(vhat) + dt(state.eps))
