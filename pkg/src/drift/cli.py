"""Single entry point wiring configs, persistence, and metrics emission.

Subcommands: generate, train, eval, ablate, sweep, divergence. Every
command writes its outputs plus a reproduction manifest under --out, guards
the directory with a lock file, and exits with a category-specific code
(see errors.py). Failures print one machine-parseable line:
`error: <category>: <message>`.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, parse_config
from .errors import DriftError, InputOutputError, UsageError
from .evalkit import (
    ablation_grid,
    audit_protocol,
    bound_report,
    evaluate,
    probe_disentanglement,
    run_method,
    sweep,
)
from .synthlab.dataset import generate_dataset, split_by_receivers
from .synthlab.io import load_dataset, save_dataset
from .trainer import train
from .util import atomic_write_bytes, sha256_file, sha256_json


@contextlib.contextmanager
def _locked_out_dir(out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lock = out / ".drift.lock"
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise InputOutputError(f"output directory is locked by another run: {out}")
    except OSError as e:
        raise InputOutputError(f"cannot use output directory {out}: {e}")
    try:
        os.close(fd)
        yield out
    finally:
        with contextlib.suppress(OSError):
            os.unlink(lock)


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig, inputs: dict, outputs: list):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": cfg.raw,
        "config_sha256": cfg.config_hash,
        "inputs": inputs,
        "outputs": sorted(outputs),
    }
    atomic_write_bytes(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2).encode())


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        raw = json.loads(json.dumps(cfg.raw))
        raw["train"]["seed"] = args.seed
        from .config import from_dict

        cfg = from_dict(raw)
    return cfg


def _dataset_for(cfg: ExperimentConfig, args) -> tuple["object", dict]:
    data_path = getattr(args, "data", None)
    if data_path:
        ds = load_dataset(data_path)
        return ds, {"dataset": str(data_path), "dataset_sha256": sha256_file(data_path)}
    ds = generate_dataset(cfg.generator)
    return ds, {"dataset": "<generated>", "generator_sha256": sha256_json(cfg.generator.to_dict())}


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    with _locked_out_dir(args.out) as out:
        ds = generate_dataset(cfg.generator)
        path = out / "dataset.bin"
        save_dataset(path, ds, cfg.generator.to_dict())
        _write_manifest(out, "generate", cfg,
                        {"generator_sha256": sha256_json(cfg.generator.to_dict())},
                        ["dataset.bin", "dataset.bin.json"])
    print(f"wrote {path} ({len(ds)} samples)")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    with _locked_out_dir(args.out) as out:
        ds, inputs = _dataset_for(cfg, args)
        split = split_by_receivers(ds, cfg.protocol.train_receivers, cfg.protocol.test_receivers)
        train_cfg = cfg.train
        if args.method:
            from .evalkit.methods import method_train_config

            train_cfg = method_train_config(args.method, cfg.train, cfg.train.seed)
        result = train(split.train, train_cfg, out)
        audit = audit_protocol(split.train, split.test)
        atomic_write_bytes(out / "protocol_audit.json",
                           json.dumps(audit, sort_keys=True, indent=2).encode())
        _write_manifest(out, "train", cfg, inputs,
                        [p.name for p in result.checkpoints]
                        + ["train_metrics.csv", "epoch_metrics.csv", "run_manifest.json",
                           "protocol_audit.json"])
    print(f"trained {train_cfg.method} for {train_cfg.epochs} epochs -> {out}")
    return 0


def _eval_table(records, receivers) -> list[list]:
    header = ["test_receiver"] + [r.method for r in records]
    rows = [header]
    for rx in receivers:
        rows.append([rx] + [f"{r.per_receiver[rx]:.6f}" for r in records])
    rows.append(["Average"] + [f"{r.average:.6f}" for r in records])
    return rows


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    with _locked_out_dir(args.out) as out:
        ds, inputs = _dataset_for(cfg, args)
        split = split_by_receivers(ds, cfg.protocol.train_receivers, cfg.protocol.test_receivers)
        records = []
        for run_dir in args.runs:
            run_dir = Path(run_dir)
            manifest_path = run_dir / "run_manifest.json"
            if not manifest_path.exists():
                raise InputOutputError(f"run manifest not found: {manifest_path}")
            manifest = json.loads(manifest_path.read_text())
            ckpts = [run_dir / "checkpoints" / name for name in manifest["checkpoints"]]
            for c in ckpts:
                if not c.exists():
                    raise InputOutputError(f"checkpoint not found: {c}")
            records.append(evaluate(ckpts, split.test, manifest["train_config"]["method"]))
        rows = _eval_table(records, sorted(split.test.receivers()))
        with open(out / "eval_table.csv", "w", newline="") as f:
            csv.writer(f).writerows(rows)
        atomic_write_bytes(out / "eval_results.json",
                           json.dumps([r.to_dict() for r in records], indent=2).encode())
        _write_manifest(out, "eval", cfg, inputs, ["eval_table.csv", "eval_results.json"])
    print((out / "eval_table.csv").read_text())
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    with _locked_out_dir(args.out) as out:
        ds, inputs = _dataset_for(cfg, args)
        rows = ablation_grid(cfg.protocol, ds, cfg.train, out / "runs")
        receivers = sorted(rows[0][1].per_receiver)
        with open(out / "ablation_table.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["model"] + [f"rx_{r}" for r in receivers] + ["average"])
            for name, rec in rows:
                w.writerow([name] + [f"{rec.per_receiver[r]:.6f}" for r in receivers]
                           + [f"{rec.average:.6f}"])
        atomic_write_bytes(out / "ablation_results.json",
                           json.dumps({n: r.to_dict() for n, r in rows}, indent=2).encode())
        _write_manifest(out, "ablate", cfg, inputs,
                        ["ablation_table.csv", "ablation_results.json"])
    print((out / "ablation_table.csv").read_text())
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v]
    except ValueError as e:
        raise UsageError(f"bad --values list: {e}")
    with _locked_out_dir(args.out) as out:
        ds, inputs = _dataset_for(cfg, args)
        curve = sweep(args.param, values, cfg.protocol, ds, cfg.train, out / "runs")
        with open(out / "sweep_curve.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([args.param, "average_accuracy"])
            w.writerows([[v, f"{a:.6f}"] for v, a in curve])
        _write_manifest(out, "sweep", cfg, inputs, ["sweep_curve.csv"])
    print((out / "sweep_curve.csv").read_text())
    return 0


def cmd_divergence(args) -> int:
    cfg = _load_config(args)
    with _locked_out_dir(args.out) as out:
        ds, inputs = _dataset_for(cfg, args)
        split = split_by_receivers(ds, cfg.protocol.train_receivers, cfg.protocol.test_receivers)
        run_dir = Path(args.run)
        manifest_path = run_dir / "run_manifest.json"
        if not manifest_path.exists():
            raise InputOutputError(f"run manifest not found: {manifest_path}")
        manifest = json.loads(manifest_path.read_text())
        ckpt = run_dir / "checkpoints" / manifest["checkpoints"][-1]
        if not ckpt.exists():
            raise InputOutputError(f"checkpoint not found: {ckpt}")
        reports = bound_report(ckpt, split)
        probe = probe_disentanglement(ckpt, split.train)
        payload = {
            "checkpoint": str(ckpt),
            "reports": {k: dataclasses.asdict(v) for k, v in reports.items()},
            "epsilon_reduction": reports["raw"].epsilon - reports["z_star"].epsilon,
            "gamma_reduction": reports["raw"].gamma - reports["z_star"].gamma,
            "probes": dataclasses.asdict(probe),
        }
        atomic_write_bytes(out / "divergence_report.json",
                           json.dumps(payload, indent=2).encode())
        _write_manifest(out, "divergence", cfg, inputs, ["divergence_report.json"])
    print(json.dumps(payload["reports"], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drift", description=__doc__)
    ap.add_argument("--version", action="version", version=f"drift {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the training seed")
        if data:
            p.add_argument("--data", default=None, help="dataset file (else generated from config)")

    common(sub.add_parser("generate", help="synthesize a dataset"), data=False)
    common(sub.add_parser("train", help="train one method"))
    sub.choices["train"].add_argument("--method", choices=["drift", "erm", "mtl", "dann"],
                                      default=None)
    common(sub.add_parser("eval", help="evaluate trained runs on the test receivers"))
    sub.choices["eval"].add_argument("--runs", nargs="+", required=True,
                                     help="run directories from `drift train`")
    common(sub.add_parser("ablate", help="run the 8-row component ablation"))
    common(sub.add_parser("sweep", help="vary one loss weight"))
    sub.choices["sweep"].add_argument("--param", required=True,
                                      choices=["lambda1", "lambda2", "lambda3"])
    sub.choices["sweep"].add_argument("--values", required=True,
                                      help="comma-separated values")
    common(sub.add_parser("divergence", help="divergence proxies for one run"))
    sub.choices["divergence"].add_argument("--run", required=True, help="run directory")
    return ap


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "divergence": cmd_divergence,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DriftError as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return InputOutputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
