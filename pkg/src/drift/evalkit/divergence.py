"""Proxy divergence estimators for the unseen-domain risk bound.

The exact supremum-based domain divergence is intractable, so a proxy
A-distance stands in: train a linear domain classifier on half of A-vs-B,
measure held-out error e, report 2*(1-2e) clamped to [0,2]. The hypothesis
class (linear) is fixed across feature spaces so raw-frame and embedding
numbers are comparable. The construction is symmetric under swapping A and
B: splits interleave deterministically, shared standardization combines
per-set moments commutatively, and gradients accumulate per class block.

The mixture term uses the uniform source pool rather than solving for
optimal mixture weights (flagged in reports as "uniform-mixture proxy").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from ..synthlab.dataset import DatasetSplit
from .metrics import batched_forward, load_model


@dataclass(frozen=True)
class DivergenceReport:
    feature_space: str                      # raw | z | z_star | z_prime
    epsilon: float                          # max pairwise source divergence
    gamma: float                            # target vs uniform source pool
    pairwise: dict = field(default_factory=dict)
    mixture: str = "uniform-mixture proxy"


def _halves(x: np.ndarray):
    return x[0::2], x[1::2]


def _fit_domain_classifier(xa: np.ndarray, xb: np.ndarray, steps: int, lr: float):
    """Zero-init softmax regression on two blocks; per-block gradient sums
    keep the fit exactly label-swap symmetric."""
    f = xa.shape[1]
    w = np.zeros((2, f))
    b = np.zeros(2)
    m_w = np.zeros_like(w)
    v_w = np.zeros_like(w)
    m_b = np.zeros_like(b)
    v_b = np.zeros_like(b)
    n = len(xa) + len(xb)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for t in range(1, steps + 1):
        gw = np.zeros_like(w)
        gb = np.zeros_like(b)
        for x_blk, cls in ((xa, 0), (xb, 1)):
            logits = x_blk @ w.T + b
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            p[:, cls] -= 1.0
            gw += p.T @ x_blk / n
            gb += p.sum(axis=0) / n
        for g, mm, vv, target in ((gw, m_w, v_w, w), (gb, m_b, v_b, b)):
            mm *= beta1
            mm += (1 - beta1) * g
            vv *= beta2
            vv += (1 - beta2) * g * g
            target -= lr * (mm / (1 - beta1**t)) / (np.sqrt(vv / (1 - beta2**t)) + eps)
    return w, b


def proxy_divergence(features_a: np.ndarray, features_b: np.ndarray,
                     steps: int = 200, lr: float = 0.05) -> float:
    """Proxy A-distance between two sample sets, in [0, 2]."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise UsageError("proxy_divergence needs nonempty sample sets")
    ratio = max(len(a), len(b)) / min(len(a), len(b))
    if ratio > 10:
        raise UsageError(f"class imbalance {ratio:.1f}:1 exceeds 10:1")
    a_train, a_test = _halves(a)
    b_train, b_test = _halves(b)

    # shared standardization from commutatively combined per-set moments
    na, nb = len(a_train), len(b_train)
    wa, wb = na / (na + nb), nb / (na + nb)
    mean = wa * a_train.mean(axis=0) + wb * b_train.mean(axis=0)
    second = wa * (a_train**2).mean(axis=0) + wb * (b_train**2).mean(axis=0)
    std = np.sqrt(np.maximum(second - mean**2, 0.0))
    std = np.where(std < 1e-8, 1.0, std)

    def norm(x):
        return (x - mean) / std

    w, bias = _fit_domain_classifier(norm(a_train), norm(b_train), steps, lr)
    errors = 0
    for x_blk, cls in ((a_test, 0), (b_test, 1)):
        pred = (norm(x_blk) @ w.T + bias).argmax(axis=1)
        errors += int((pred != cls).sum())
    e = errors / (len(a_test) + len(b_test))
    return float(np.clip(2.0 * (1.0 - 2.0 * e), 0.0, 2.0))


def _per_receiver_features(feats: np.ndarray, d_labels: np.ndarray) -> dict[int, np.ndarray]:
    return {int(r): feats[d_labels == r] for r in np.unique(d_labels)}


def divergence_report(feature_space: str, source_feats: dict[int, np.ndarray],
                      target_feats: np.ndarray) -> DivergenceReport:
    """Epsilon = max pairwise source divergence (0 for a single source);
    gamma = divergence of the target from the pooled sources."""
    receivers = sorted(source_feats)
    pairwise = {}
    for i, ri in enumerate(receivers):
        for rj in receivers[i + 1 :]:
            pairwise[f"{ri}-{rj}"] = proxy_divergence(source_feats[ri], source_feats[rj])
    epsilon = max(pairwise.values()) if pairwise else 0.0
    pool = np.concatenate([source_feats[r] for r in receivers], axis=0)
    gamma = proxy_divergence(target_feats, pool)
    return DivergenceReport(feature_space, epsilon, gamma, pairwise)


def bound_report(checkpoint_path, split: DatasetSplit) -> dict[str, DivergenceReport]:
    """Divergence proxies on raw flattened frames and on the frozen
    transmitter-specific embedding half, for the bound's direction check."""
    if len(split.train_receivers) < 2:
        raise UsageError("bound_report needs at least two source receivers")
    raw_train = split.train.x.reshape(len(split.train), -1).astype(np.float64)
    raw_test = split.test.x.reshape(len(split.test), -1).astype(np.float64)
    model, _ = load_model(checkpoint_path)
    z_train = batched_forward(model, split.train.x, want="z")
    z_test = batched_forward(model, split.test.x, want="z")
    half = z_train.shape[1] // 2
    reports = {
        "raw": divergence_report(
            "raw", _per_receiver_features(raw_train, split.train.d), raw_test
        ),
        "z_star": divergence_report(
            "z_star",
            _per_receiver_features(z_train[:, :half].astype(np.float64), split.train.d),
            z_test[:, :half].astype(np.float64),
        ),
    }
    return reports
