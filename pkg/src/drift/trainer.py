"""Training loop: batching, loss composition, backward, Adam updates, and
rolling checkpoints.

Training is a pure function of (dataset bytes, TrainConfig): the per-epoch
shuffle derives from (seed, epoch), weight init from the seed, and nothing
reads wall clock or global RNG state. A run resumed from any saved epoch
checkpoint therefore continues bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InputOutputError, TrainingDivergedError
from .numerics import AdamState, Tape, Tensor, adam_step, load_checkpoint, save_checkpoint
from .network import DriftModel, ModelConfig, predict
from .objective import LossBreakdown, ce_loss, grl_loss, total_loss
from .numerics import tensor as ops
from .synthlab.dataset import Dataset
from .util import STREAM_BATCH, atomic_write_bytes, sha256_json, substream


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-4
    lambda1: float = 1.0
    lambda2: float = 0.01
    lambda3: float = 0.02
    seed: int = 1
    preset: str = "desk"
    method: str = "drift"
    checkpoint_last_n: int = 5
    use_rx_head: bool = True        # False detaches CE2: tx-head-only training
    detach_centroids: bool = False
    grl_lambda: float | None = None  # None: reuse lambda1 as the reversal coefficient

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.epochs < 1 or self.checkpoint_last_n < 1:
            raise ConfigError("epochs and checkpoint_last_n must be >= 1")

    @property
    def effective_grl_lambda(self) -> float:
        return self.lambda1 if self.grl_lambda is None else self.grl_lambda


@dataclass
class TrainState:
    model: DriftModel
    adam: AdamState
    domain_map: dict[int, int]
    epoch: int = 0      # completed epochs
    step: int = 0
    history: list[LossBreakdown] = field(default_factory=list)
    last_batch_correct: int = 0


@dataclass
class TrainResult:
    checkpoints: list[Path]
    metrics_path: Path
    epoch_metrics_path: Path
    manifest_path: Path
    state: TrainState


def make_batches(n: int, batch_size: int, seed: int, epoch: int):
    """Seeded per-epoch permutation cut into batches; the short final batch
    is kept. Batches mix receivers because the shuffle is global."""
    perm = substream(seed, STREAM_BATCH, epoch).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def domain_mapping(train_receivers) -> dict[int, int]:
    """1-based receiver labels -> contiguous 0-based domain classes."""
    return {r: i for i, r in enumerate(sorted(int(v) for v in train_receivers))}


def _dataset_fingerprint(ds: Dataset) -> str:
    h = hashlib.sha256()
    for arr in (ds.x, ds.y, ds.d, ds.uid):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def init_state(ds: Dataset, cfg: TrainConfig) -> TrainState:
    dmap = domain_mapping(np.unique(ds.d))
    model_cfg = ModelConfig(
        n_tx=ds.k_tx, n_domains=len(dmap), preset=cfg.preset, method=cfg.method,
        input_len=ds.frame_len,
    )
    model = DriftModel(model_cfg, seed=cfg.seed)
    return TrainState(model=model, adam=AdamState(cfg.learning_rate), domain_map=dmap)


def train_step(state: TrainState, batch_x, batch_y, batch_d, cfg: TrainConfig) -> LossBreakdown:
    """One optimization step; returns the recorded loss breakdown.

    Aborts with diagnostics if any term goes non-finite: silently skipping
    would hide the separation-loss divergence failure mode.
    """
    model = state.model
    x = Tensor(batch_x)
    with Tape() as tape:
        out = model.forward(x, train=True, grl_lambda=cfg.effective_grl_lambda)
        ce_tx, _ = ops.softmax_cross_entropy(out["tx_logits"], batch_y)
        zero = Tensor(np.float32(0.0))
        if out["rx_logits"] is not None and cfg.use_rx_head:
            ce_rx, _ = ops.softmax_cross_entropy(out["rx_logits"], batch_d)
        else:
            ce_rx = zero
        grl_term = grl_loss(out["dom_logits"], batch_d) if out["dom_logits"] is not None else zero
        if model.cfg.uses_split:
            center_term = ops.center_loss(out["z_prime"], batch_d, cfg.detach_centroids)
            mse_term = ops.separation_loss(out["z_star"], out["z_prime"])
        else:
            center_term, mse_term = zero, zero
        total, parts = total_loss(ce_tx, ce_rx, grl_term, center_term, mse_term,
                                  cfg.lambda1, cfg.lambda2, cfg.lambda3)
        grads = tape.backward(total, params=model.params().values())
    max_grad = max(float(np.abs(g).max(initial=0.0)) for g in grads.values())
    if not np.isfinite(parts.total) or not np.isfinite(max_grad):
        raise TrainingDivergedError(
            f"non-finite loss at step {state.step}: {parts}; max |grad|={max_grad}"
        )
    adam_step(state.adam, model.params(), grads)
    state.step += 1
    state.history.append(parts)
    # training-batch accuracy feeds the per-epoch trace
    state.last_batch_correct = int((predict(out["tx_logits"]) == batch_y).sum())
    return parts


def _checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:04d}.ckpt"


def save_state(path, state: TrainState, cfg: TrainConfig) -> None:
    extra = {
        "epoch": state.epoch,
        "step": state.step,
        "domain_map": {str(k): v for k, v in state.domain_map.items()},
        "train_config": asdict(cfg),
    }
    save_checkpoint(path, state.model.cfg.to_manifest(), state.model.params(),
                    state.model.buffers(), state.adam, extra)


def resume(path) -> tuple[TrainState, TrainConfig]:
    """Rebuild a TrainState so training continues bit-identically."""
    arch, params, buffers, adam, extra = load_checkpoint(path)
    cfg = TrainConfig(**extra["train_config"])
    model = DriftModel(ModelConfig.from_manifest(arch), seed=cfg.seed)
    model.load_state(params, buffers)
    if adam is None:
        adam = AdamState(cfg.learning_rate)
    state = TrainState(
        model=model, adam=adam,
        domain_map={int(k): v for k, v in extra["domain_map"].items()},
        epoch=extra["epoch"], step=extra["step"],
    )
    return state, cfg


def train(ds: Dataset, cfg: TrainConfig, out_dir,
          start_state: TrainState | None = None) -> TrainResult:
    """Run the full schedule, keeping the last `checkpoint_last_n` epoch
    checkpoints plus per-step and per-epoch metric traces."""
    out = Path(out_dir)
    try:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputOutputError(f"cannot create output directory {out}: {e}") from e

    state = start_state if start_state is not None else init_state(ds, cfg)
    dmap = state.domain_map
    y0 = ds.y.astype(np.int64) - 1
    d0 = np.array([dmap[int(v)] for v in ds.d], dtype=np.int64)

    metrics_path = out / "train_metrics.csv"
    epoch_path = out / "epoch_metrics.csv"
    mode = "a" if state.epoch > 0 and metrics_path.exists() else "w"
    kept: list[Path] = sorted((out / "checkpoints").glob("epoch_*.ckpt"))
    with open(metrics_path, mode, newline="") as mf, open(epoch_path, mode, newline="") as ef:
        mw = csv.writer(mf)
        ew = csv.writer(ef)
        if mode == "w":
            mw.writerow(LossBreakdown.CSV_FIELDS)
            ew.writerow(["epoch", "train_accuracy", "mean_ce_tx", "mean_total"])
        for epoch in range(state.epoch, cfg.epochs):
            correct = 0
            ce_sum = 0.0
            total_sum = 0.0
            n_batches = 0
            for idx in make_batches(len(ds), cfg.batch_size, cfg.seed, epoch):
                parts = train_step(state, ds.x[idx], y0[idx], d0[idx], cfg)
                mw.writerow([state.step, parts.ce_tx, parts.ce_rx, parts.grl,
                             parts.center, parts.mse, parts.total])
                correct += state.last_batch_correct
                ce_sum += parts.ce_tx
                total_sum += parts.total
                n_batches += 1
            state.epoch = epoch + 1
            ew.writerow([state.epoch, correct / len(ds), ce_sum / n_batches,
                         total_sum / n_batches])
            ckpt = out / "checkpoints" / _checkpoint_name(state.epoch)
            save_state(ckpt, state, cfg)
            kept.append(ckpt)
            while len(kept) > cfg.checkpoint_last_n:
                old = kept.pop(0)
                old.unlink(missing_ok=True)

    manifest = {
        "tool_version": __version__,
        "train_config": asdict(cfg),
        "config_sha256": sha256_json(asdict(cfg)),
        "dataset_sha256": _dataset_fingerprint(ds),
        "train_uids_sha256": hashlib.sha256(np.sort(ds.uid).tobytes()).hexdigest(),
        "n_samples": len(ds),
        "receivers": ds.receivers(),
        "domain_map": {str(k): v for k, v in dmap.items()},
        "checkpoints": [p.name for p in kept],
        "model": state.model.cfg.to_manifest(),
    }
    manifest_path = out / "run_manifest.json"
    atomic_write_bytes(manifest_path, json.dumps(manifest, sort_keys=True, indent=2).encode())
    return TrainResult(kept, metrics_path, epoch_path, manifest_path, state)
