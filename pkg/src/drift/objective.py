"""The four loss terms and their weighted composition.

Terms: transmitter/receiver cross-entropies, the adversarial domain loss
routed through the gradient-reversal layer, the per-domain center loss on
receiver features, and the negated-MSE separation loss. The total is folded
in a fixed operand order (ce_tx, ce_rx, grl, center, mse) so the recorded
breakdown is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .numerics import tensor as ops
from .numerics.tensor import Tensor


@dataclass(frozen=True)
class LossBreakdown:
    ce_tx: float
    ce_rx: float
    grl: float
    center: float
    mse: float
    total: float
    lambda1: float
    lambda2: float
    lambda3: float

    def recompute_total(self) -> float:
        return (((self.ce_tx + self.ce_rx) + self.lambda1 * self.grl)
                + self.lambda2 * self.center) + self.lambda3 * self.mse

    CSV_FIELDS = ("step", "ce_tx", "ce_rx", "grl", "center", "mse", "total")


def ce_loss(tx_logits: Tensor, y: np.ndarray, rx_logits: Tensor, d: np.ndarray):
    """Batch-mean cross-entropies of the two classifier heads."""
    ce_tx, _ = ops.softmax_cross_entropy(tx_logits, y)
    ce_rx, _ = ops.softmax_cross_entropy(rx_logits, d)
    return ce_tx, ce_rx


def grl_loss(dom_logits: Tensor, d: np.ndarray) -> Tensor:
    """Cross-entropy of the discriminator against receiver labels. The
    reversal layer sits inside the model, so the forward value equals a
    plain cross-entropy."""
    loss, _ = ops.softmax_cross_entropy(dom_logits, d)
    return loss


center_loss = ops.center_loss
separation_loss = ops.separation_loss


def total_loss(ce_tx, ce_rx, grl_term, center_term, mse_term,
               lambda1: float, lambda2: float, lambda3: float):
    """Compose the five scalar terms; returns (scalar tensor, breakdown)."""
    if min(lambda1, lambda2, lambda3) < 0:
        raise ConfigError("loss weights must be nonnegative")
    total = ops.weighted_sum(
        [ce_tx, ce_rx, grl_term, center_term, mse_term],
        [1.0, 1.0, lambda1, lambda2, lambda3],
    )
    # the stored total is the fixed-order fold of the stored parts, so the
    # decomposition identity holds exactly on the record
    ce_tx_f, ce_rx_f = float(ce_tx.data), float(ce_rx.data)
    grl_f, center_f, mse_f = float(grl_term.data), float(center_term.data), float(mse_term.data)
    total_f = (((ce_tx_f + ce_rx_f) + lambda1 * grl_f) + lambda2 * center_f) + lambda3 * mse_f
    parts = LossBreakdown(ce_tx=ce_tx_f, ce_rx=ce_rx_f, grl=grl_f, center=center_f,
                          mse=mse_f, total=total_f,
                          lambda1=lambda1, lambda2=lambda2, lambda3=lambda3)
    return total, parts
