"""Evaluation protocol: per-receiver accuracy with last-n checkpoint
averaging, mirroring the comparison-table layout (one row per test receiver
plus the average)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, UsageError
from ..network import DriftModel, ModelConfig, predict
from ..numerics import Tensor, load_checkpoint
from ..synthlab.dataset import Dataset


@dataclass(frozen=True)
class ProtocolSpec:
    train_receivers: tuple[int, ...]
    test_receivers: tuple[int, ...]
    seeds: tuple[int, ...] = (1,)
    days: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "train_receivers", tuple(sorted(self.train_receivers)))
        object.__setattr__(self, "test_receivers", tuple(sorted(self.test_receivers)))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "days", tuple(self.days))
        if set(self.train_receivers) & set(self.test_receivers):
            raise ConfigError("cross-receiver protocol requires disjoint receiver sets")
        if not self.seeds:
            raise ConfigError("protocol needs at least one seed")


@dataclass
class MetricsRecord:
    method: str
    per_receiver: dict[int, float]
    average: float
    per_seed: dict[int, dict[int, float]] = field(default_factory=dict)
    checkpoint_averaged: bool = True

    @staticmethod
    def from_per_receiver(method: str, per_receiver: dict[int, float],
                          per_seed=None, checkpoint_averaged=True) -> "MetricsRecord":
        avg = float(np.mean([per_receiver[r] for r in sorted(per_receiver)]))
        return MetricsRecord(method, dict(per_receiver), avg,
                             per_seed or {}, checkpoint_averaged)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "per_receiver": {str(k): v for k, v in sorted(self.per_receiver.items())},
            "average": self.average,
            "per_seed": {str(s): {str(r): a for r, a in sorted(v.items())}
                         for s, v in sorted(self.per_seed.items())},
            "checkpoint_averaged": self.checkpoint_averaged,
        }


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise UsageError(f"accuracy shape mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise UsageError("accuracy of empty inputs is undefined")
    return float((preds == labels).mean())


def batched_forward(model: DriftModel, x: np.ndarray, batch: int = 512,
                    want: str = "tx_logits") -> np.ndarray:
    """Eval-mode forward over a sample block; pure function of (params, x)."""
    outs = []
    for i in range(0, len(x), batch):
        res = model.forward(Tensor(x[i : i + batch]), train=False)
        outs.append(res[want].data if want != "z" else res["z"].data)
    return np.concatenate(outs, axis=0)


def load_model(ckpt_path, expect_arch: dict | None = None) -> tuple[DriftModel, dict]:
    arch, params, buffers, _, extra = load_checkpoint(ckpt_path, expect_arch)
    model = DriftModel(ModelConfig.from_manifest(arch), seed=0)
    model.load_state(params, buffers)
    return model, extra


def evaluate(checkpoint_paths, test: Dataset, method: str = "drift") -> MetricsRecord:
    """Average per-receiver transmitter accuracy over the given checkpoints
    (typically the last five epochs), then across receivers."""
    if not checkpoint_paths:
        raise UsageError("evaluate needs at least one checkpoint")
    receivers = test.receivers()
    acc = {r: [] for r in receivers}
    expect_arch = None
    for path in checkpoint_paths:
        model, _ = load_model(path, expect_arch)
        expect_arch = model.cfg.to_manifest()  # later checkpoints must match
        preds = predict(batched_forward(model, test.x))
        truth = test.y.astype(np.int64) - 1
        for r in receivers:
            sel = test.d == r
            acc[r].append(accuracy(preds[sel], truth[sel]))
    per_receiver = {r: float(np.mean(acc[r])) for r in receivers}
    return MetricsRecord.from_per_receiver(method, per_receiver)
