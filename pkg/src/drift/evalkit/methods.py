"""Method runners: the full method, the three baselines, the component
ablation grid, and hyperparameter sweeps.

All methods share the encoder preset, seeds, and batching; they differ only
in which heads exist and which loss terms are active:

  drift  split embedding, both heads, discriminator, all loss terms
  mtl    split embedding, both heads, no adversary or regularizers
  erm    full embedding into the transmitter head only
  dann   full embedding, transmitter head plus reversed domain classifier
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..synthlab.dataset import Dataset, split_by_receivers
from ..trainer import TrainConfig, train
from ..util import atomic_write_bytes
from .metrics import MetricsRecord, ProtocolSpec, evaluate

ABLATION_ROWS = (
    ("Basic Model", (0.0, 0.0, 0.0)),
    ("+GRL", (None, 0.0, 0.0)),
    ("+Cen", (0.0, None, 0.0)),
    ("+MSE", (0.0, 0.0, None)),
    ("+MSE+GRL", (None, 0.0, None)),
    ("+MSE+Cen", (0.0, None, None)),
    ("+GRL+Cen", (None, None, 0.0)),
    ("Full Model", (None, None, None)),
)


def method_train_config(method: str, base: TrainConfig, seed: int) -> TrainConfig:
    """Specialize the shared config for one method/seed pair."""
    if method not in ("drift", "erm", "mtl", "dann"):
        raise ConfigError(f"unknown method {method!r}")
    kw = dataclasses.asdict(base)
    kw.update(seed=seed, method=method)
    if method in ("erm", "mtl"):
        kw.update(lambda1=0.0, lambda2=0.0, lambda3=0.0)
    elif method == "dann":
        kw.update(lambda2=0.0, lambda3=0.0)
    return TrainConfig(**kw)


def audit_protocol(train_ds: Dataset, test_ds: Dataset) -> dict:
    """Sample-id audit: no test sample may appear in any training batch.
    The trainer consumes exactly `train_ds`, so auditing the split suffices."""
    overlap = np.intersect1d(train_ds.uid, test_ds.uid)
    return {
        "train_samples": int(len(train_ds)),
        "test_samples": int(len(test_ds)),
        "overlap_count": int(len(overlap)),
        "train_uids_sha256": hashlib.sha256(np.sort(train_ds.uid).tobytes()).hexdigest(),
        "test_uids_sha256": hashlib.sha256(np.sort(test_ds.uid).tobytes()).hexdigest(),
    }


def run_method(method: str, protocol: ProtocolSpec, ds: Dataset, base_cfg: TrainConfig,
               workdir, test_ds: Dataset | None = None) -> MetricsRecord:
    """Train/evaluate one method across the protocol seeds.

    `test_ds` overrides the in-dataset test split (used by the channel-shift
    protocol, where test frames come from a perturbed generation day).
    """
    split = split_by_receivers(ds, protocol.train_receivers, protocol.test_receivers)
    test = test_ds if test_ds is not None else split.test
    workdir = Path(workdir)
    per_seed: dict[int, dict[int, float]] = {}
    for seed in protocol.seeds:
        cfg = method_train_config(method, base_cfg, seed)
        run_dir = workdir / f"{method}_seed{seed}"
        result = train(split.train, cfg, run_dir)
        audit = audit_protocol(split.train, test)
        atomic_write_bytes(run_dir / "protocol_audit.json",
                           json.dumps(audit, sort_keys=True, indent=2).encode())
        record = evaluate(result.checkpoints, test, method)
        per_seed[seed] = record.per_receiver
    receivers = sorted(next(iter(per_seed.values())))
    per_receiver = {r: float(np.mean([per_seed[s][r] for s in protocol.seeds]))
                    for r in receivers}
    return MetricsRecord.from_per_receiver(method, per_receiver, per_seed)


def ablation_grid(protocol: ProtocolSpec, ds: Dataset, base_cfg: TrainConfig,
                  workdir) -> list[tuple[str, MetricsRecord]]:
    """Component toggles of the full model: eight rows from the bare
    two-head network up to all three extra terms, defaults where active."""
    defaults = (base_cfg.lambda1, base_cfg.lambda2, base_cfg.lambda3)
    rows = []
    for name, mask in ABLATION_ROWS:
        lams = tuple(dflt if m is None else m for m, dflt in zip(mask, defaults))
        kw = dataclasses.asdict(base_cfg)
        kw.update(lambda1=lams[0], lambda2=lams[1], lambda3=lams[2], method="drift")
        cfg = TrainConfig(**kw)
        slug = name.replace("+", "p").replace(" ", "_").lower()
        split = split_by_receivers(ds, protocol.train_receivers, protocol.test_receivers)
        per_seed: dict[int, dict[int, float]] = {}
        for seed in protocol.seeds:
            run_cfg = dataclasses.replace(cfg, seed=seed)
            result = train(split.train, run_cfg, Path(workdir) / f"ablate_{slug}_seed{seed}")
            record = evaluate(result.checkpoints, split.test, name)
            per_seed[seed] = record.per_receiver
        receivers = sorted(next(iter(per_seed.values())))
        per_receiver = {r: float(np.mean([per_seed[s][r] for s in protocol.seeds]))
                        for r in receivers}
        rows.append((name, MetricsRecord.from_per_receiver(name, per_receiver, per_seed)))
    return rows


def sweep(param: str, values, protocol: ProtocolSpec, ds: Dataset,
          base_cfg: TrainConfig, workdir) -> list[tuple[float, float]]:
    """Vary one loss weight, others held at their configured defaults;
    returns (value, seed-mean average accuracy) in input order."""
    if param not in ("lambda1", "lambda2", "lambda3"):
        raise ConfigError(f"sweep parameter must be lambda1/2/3, got {param!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    curve = []
    for v in values:
        kw = dataclasses.asdict(base_cfg)
        kw.update({param: float(v), "method": "drift"})
        cfg = TrainConfig(**kw)
        record = run_method("drift", protocol, ds, cfg,
                            Path(workdir) / f"sweep_{param}_{v}")
        curve.append((float(v), record.average))
    return curve
