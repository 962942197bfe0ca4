"""Linear probes: softmax regression on frozen features.

Used for the disentanglement read-out (can a linear model recover the
receiver from each embedding half?) and as the raw-frame separability check.
Probes train full-batch with Adam on standardized features; everything is
seeded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..numerics import AdamState, Parameter, Tape, Tensor, adam_step, dense, softmax_cross_entropy
from ..synthlab.dataset import Dataset
from ..util import STREAM_PROBE, substream
from .metrics import accuracy, batched_forward, load_model


@dataclass(frozen=True)
class ProbeReport:
    rx_acc_on_z_star: float
    rx_acc_on_z_prime: float
    tx_acc_on_z_star: float
    chance_rx: float


def _standardize(train, test):
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    return (train - mean) / std, (test - mean) / std


def fit_linear_probe(features: np.ndarray, labels: np.ndarray, n_classes: int,
                     seed: int = 0, steps: int = 300, lr: float = 0.05,
                     holdout: float = 0.3) -> float:
    """Train a softmax linear probe on a seeded split of (features, labels);
    returns held-out accuracy."""
    n = len(features)
    if n < 4:
        raise UsageError("probe needs at least 4 samples")
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    perm = substream(seed, STREAM_PROBE).permutation(n)
    n_test = max(1, int(round(n * holdout)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    f_train, f_test = _standardize(feats[train_idx], feats[test_idx])
    y_train, y_test = labels[train_idx], labels[test_idx]

    w = Parameter("probe.w", np.zeros((n_classes, feats.shape[1])))
    b = Parameter("probe.b", np.zeros(n_classes))
    params = {"probe.w": w, "probe.b": b}
    adam = AdamState(lr)
    xt = Tensor(f_train)
    for _ in range(steps):
        with Tape() as tape:
            loss, _ = softmax_cross_entropy(dense(xt, w, b), y_train)
            grads = tape.backward(loss, params=params.values())
        adam_step(adam, params, grads)
    logits = f_test @ w.data.T + b.data
    return accuracy(logits.argmax(axis=1), y_test)


def probe_disentanglement(checkpoint_path, ds: Dataset, seed: int = 0) -> ProbeReport:
    """Freeze the checkpoint, embed `ds` (held-in receivers), and probe:
    receiver identity from each embedding half, transmitter from the
    transmitter half."""
    model, _ = load_model(checkpoint_path)
    z = batched_forward(model, ds.x, want="z")
    e = z.shape[1]
    z_star, z_prime = z[:, : e // 2], z[:, e // 2 :]
    receivers = ds.receivers()
    rx_labels = np.array([receivers.index(int(v)) for v in ds.d], dtype=np.int64)
    tx_labels = ds.y.astype(np.int64) - 1
    return ProbeReport(
        rx_acc_on_z_star=fit_linear_probe(z_star, rx_labels, len(receivers), seed),
        rx_acc_on_z_prime=fit_linear_probe(z_prime, rx_labels, len(receivers), seed),
        tx_acc_on_z_star=fit_linear_probe(z_star, tx_labels, ds.k_tx, seed),
        chance_rx=1.0 / len(receivers),
    )
