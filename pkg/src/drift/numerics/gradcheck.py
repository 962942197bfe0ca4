"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from .tensor import Parameter, Tape


@dataclass
class GradCheckReport:
    max_rel_err: float
    ok: bool
    tolerance: float
    per_input: dict[str, float] = field(default_factory=dict)


def grad_check(f, points, tolerance: float = 1e-4, h_scale: float = 1e-4) -> GradCheckReport:
    """Compare tape gradients of scalar `f(tensors)` against central
    differences, coordinate by coordinate.

    `points` is a list of float64 arrays; each becomes a leaf the check
    differentiates with respect to. Step size is relative:
    h = h_scale * max(1, |x_i|). Functions containing a gradient-reversal
    node are rejected: its forward is the identity, so the numeric
    derivative can never match the reversed tape gradient.
    """
    leaves = [Parameter(f"arg{i}", np.asarray(p, dtype=np.float64)) for i, p in enumerate(points)]
    with Tape() as tape:
        out = f(*leaves)
    if tape.grl_count:
        raise UsageError("grad_check cannot verify graphs containing grl; "
                         "compare the reversed path analytically instead")
    if out.data.ndim != 0:
        raise UsageError("grad_check target must be scalar-valued")
    analytic = tape.backward(out, params=leaves)

    worst = 0.0
    per_input = {}
    for leaf in leaves:
        a = analytic[leaf.name]
        flat = leaf.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            h = h_scale * max(1.0, abs(orig))
            flat[i] = orig + h
            hi = float(f(*leaves).data)
            flat[i] = orig - h
            lo = float(f(*leaves).data)
            flat[i] = orig
            num[i] = (hi - lo) / (2 * h)
        num = num.reshape(leaf.data.shape)
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(num)))
        err = float(np.max(np.abs(a - num) / denom))
        per_input[leaf.name] = err
        worst = max(worst, err)
    return GradCheckReport(worst, worst < tolerance, tolerance, per_input)
