"""Evaluation machinery: accuracy, checkpoint averaging, method reductions,
ablation grid, probes, and divergence proxies."""

import dataclasses

import numpy as np
import pytest

from conftest import tiny_generator_config
from drift.errors import ConfigError, UsageError
from drift.evalkit import (
    ABLATION_ROWS,
    MetricsRecord,
    ProtocolSpec,
    ablation_grid,
    accuracy,
    audit_protocol,
    divergence_report,
    evaluate,
    fit_linear_probe,
    probe_disentanglement,
    proxy_divergence,
    run_method,
    sweep,
)
from drift.synthlab import generate_dataset, split_by_receivers
from drift.trainer import TrainConfig, train

TINY = TrainConfig(epochs=2, batch_size=16, learning_rate=1e-3, lambda1=1.0,
                   lambda2=0.01, lambda3=0.02, seed=3, checkpoint_last_n=5)
PROTO = ProtocolSpec(train_receivers=(1, 2), test_receivers=(3,), seeds=(3,))


# ------------------------------------------------------------- accuracy


def test_accuracy_basic():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([1, 2, 3], [0, 0, 0]) == 0.0
    assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75


def test_accuracy_errors():
    with pytest.raises(UsageError):
        accuracy([], [])
    with pytest.raises(UsageError):
        accuracy([1, 2], [1])


def test_metrics_record_average_recomputes():
    rec = MetricsRecord.from_per_receiver("x", {4: 0.6, 5: 0.8})
    assert rec.average == pytest.approx(np.mean([0.6, 0.8]))


# ------------------------------------------------------------- evaluate


@pytest.fixture(scope="module")
def tiny_split(tiny_dataset):
    return split_by_receivers(tiny_dataset, [1, 2], [3])


@pytest.fixture(scope="module")
def tiny_run(tiny_split, tmp_path_factory):
    return train(tiny_split.train, TINY, tmp_path_factory.mktemp("run"))


def test_evaluate_identical_checkpoints_equal_single(tiny_run, tiny_split):
    single = evaluate([tiny_run.checkpoints[-1]], tiny_split.test)
    five = evaluate([tiny_run.checkpoints[-1]] * 5, tiny_split.test)
    for r in single.per_receiver:  # up to mean-of-five rounding
        assert five.per_receiver[r] == pytest.approx(single.per_receiver[r], rel=1e-12)
    assert five.average == pytest.approx(single.average, rel=1e-12)


def test_evaluate_is_checkpoint_mean(tiny_run, tiny_split):
    a = evaluate([tiny_run.checkpoints[0]], tiny_split.test)
    b = evaluate([tiny_run.checkpoints[-1]], tiny_split.test)
    both = evaluate([tiny_run.checkpoints[0], tiny_run.checkpoints[-1]], tiny_split.test)
    for r in both.per_receiver:
        assert both.per_receiver[r] == pytest.approx(
            (a.per_receiver[r] + b.per_receiver[r]) / 2)


def test_evaluate_requires_checkpoints(tiny_split):
    with pytest.raises(UsageError):
        evaluate([], tiny_split.test)


# ------------------------------------------------------------ protocols


def test_protocol_rejects_overlap():
    with pytest.raises(ConfigError):
        ProtocolSpec(train_receivers=(1, 2), test_receivers=(2, 3))


def test_audit_protocol_counts(tiny_split):
    audit = audit_protocol(tiny_split.train, tiny_split.test)
    assert audit["overlap_count"] == 0
    assert audit["train_samples"] == len(tiny_split.train)
    audit_bad = audit_protocol(tiny_split.train, tiny_split.train)
    assert audit_bad["overlap_count"] == len(tiny_split.train)


# -------------------------------------------------------------- methods


def test_run_method_mtl_equals_drift_with_zero_weights(tmp_path, tiny_dataset):
    base = dataclasses.replace(TINY, lambda1=0.0, lambda2=0.0, lambda3=0.0)
    rec_mtl = run_method("mtl", PROTO, tiny_dataset, base, tmp_path / "m")
    rec_drift = run_method("drift", PROTO, tiny_dataset, base, tmp_path / "d")
    assert rec_mtl.per_receiver == rec_drift.per_receiver


def test_run_method_unknown_rejected(tmp_path, tiny_dataset):
    with pytest.raises(ConfigError):
        run_method("riei", PROTO, tiny_dataset, TINY, tmp_path)


def test_ablation_grid_rows(tmp_path, tiny_dataset):
    rows = ablation_grid(PROTO, tiny_dataset, TINY, tmp_path / "grid")
    names = [n for n, _ in rows]
    assert names == [n for n, _ in ABLATION_ROWS]
    assert len(rows) == 8
    rec_mtl = run_method("mtl", PROTO, tiny_dataset,
                         dataclasses.replace(TINY, lambda1=0.0, lambda2=0.0, lambda3=0.0),
                         tmp_path / "mtl_alone")
    rec_drift = run_method("drift", PROTO, tiny_dataset, TINY, tmp_path / "drift_alone")
    assert rows[0][1].per_receiver == rec_mtl.per_receiver       # Basic == MTL
    assert rows[-1][1].per_receiver == rec_drift.per_receiver    # Full == DRIFT


def test_sweep_single_value_equals_run_method(tmp_path, tiny_dataset):
    curve = sweep("lambda1", [0.5], PROTO, tiny_dataset, TINY, tmp_path / "s")
    rec = run_method("drift", PROTO, tiny_dataset,
                     dataclasses.replace(TINY, lambda1=0.5), tmp_path / "r")
    assert curve == [(0.5, rec.average)]


def test_sweep_preserves_order(tmp_path, tiny_dataset):
    short = dataclasses.replace(TINY, epochs=1)
    curve = sweep("lambda3", [0.1, 0.02], PROTO, tiny_dataset, short, tmp_path / "s2")
    assert [v for v, _ in curve] == [0.1, 0.02]


def test_sweep_validation(tmp_path, tiny_dataset):
    with pytest.raises(ConfigError):
        sweep("eta", [1.0], PROTO, tiny_dataset, TINY, tmp_path)
    with pytest.raises(ConfigError):
        sweep("lambda1", [], PROTO, tiny_dataset, TINY, tmp_path)


# --------------------------------------------------------------- probes


def test_probe_separable_one_hot_features():
    labels = np.tile(np.arange(4), 50)
    feats = np.eye(4)[labels] * 3.0
    assert fit_linear_probe(feats, labels, 4, seed=1) == 1.0


def test_probe_shuffled_labels_near_chance():
    rng = np.random.default_rng(5)
    feats = rng.standard_normal((600, 16))
    labels = rng.integers(0, 4, 600)
    acc = fit_linear_probe(feats, labels, 4, seed=2)
    assert abs(acc - 0.25) < 0.05


def test_probe_untrained_encoder_band(tiny_run, tiny_split):
    # fresh random encoder: the two halves carry similar receiver signal
    from drift.network import DriftModel, ModelConfig

    cfg = ModelConfig(n_tx=3, n_domains=2, preset="desk", method="drift",
                      input_len=tiny_split.train.frame_len)
    from drift.numerics import save_checkpoint

    model = DriftModel(cfg, seed=99)
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "untrained.ckpt"
        save_checkpoint(path, cfg.to_manifest(), model.params(), model.buffers())
        rep = probe_disentanglement(path, tiny_split.train)
    assert abs(rep.rx_acc_on_z_star - rep.rx_acc_on_z_prime) < 0.1 + 1e-9


# ------------------------------------------------------------ divergence


def test_proxy_same_distribution_near_zero():
    rng = np.random.default_rng(6)
    pool = rng.standard_normal((2000, 8))
    assert abs(proxy_divergence(pool[:1000], pool[1000:])) < 0.3


def test_proxy_separable_near_two():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((400, 4)) + 8.0
    b = rng.standard_normal((400, 4)) - 8.0
    assert proxy_divergence(a, b) > 1.9


def test_proxy_symmetric_exact():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((301, 6)) + 0.3
    b = rng.standard_normal((250, 6))
    assert proxy_divergence(a, b) == proxy_divergence(b, a)


def test_proxy_range_and_imbalance():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((50, 3))
    assert 0.0 <= proxy_divergence(a, a + 0.5) <= 2.0
    with pytest.raises(UsageError):
        proxy_divergence(a, rng.standard_normal((600, 3)))
    with pytest.raises(UsageError):
        proxy_divergence(a[:0], a)


def test_divergence_report_single_source_epsilon_zero():
    rng = np.random.default_rng(10)
    rep = divergence_report("raw", {1: rng.standard_normal((100, 4))},
                            rng.standard_normal((100, 4)))
    assert rep.epsilon == 0.0
    assert 0.0 <= rep.gamma <= 2.0


def test_divergence_report_identical_sources_small_epsilon():
    rng = np.random.default_rng(11)
    pool = rng.standard_normal((1200, 6))
    rep = divergence_report("raw", {1: pool[:600], 2: pool[600:]}, pool[:400] + 0.0)
    assert rep.epsilon < 0.3
