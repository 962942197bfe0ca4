"""Experiment configuration: strict-schema JSON files.

Every run is described by one file with four sections (generator, model,
train, protocol). Unknown keys are rejected and the three loss weights have
no in-code defaults: shipped config files carry them explicitly. Validation
reports every violation at once, with its JSON path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import InputOutputError, SchemaError
from .evalkit.metrics import ProtocolSpec
from .synthlab.dataset import GeneratorConfig
from .synthlab.profiles import ChannelLaw, FrameSpec, ImpairmentRanges
from .trainer import TrainConfig
from .util import sha256_json

_RANGE = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

_RANGES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "gain_imbalance": _RANGE,
        "phase_imbalance": _RANGE,
        "dc_magnitude": _RANGE,
        "cubic_real": _RANGE,
        "cubic_imag": _RANGE,
        "freq_offset": _RANGE,
        "freq_jitter": {"type": "number", "minimum": 0},
        "adc_bits_choices": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["generator", "model", "train", "protocol"],
    "properties": {
        "generator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["k_tx", "m_rx", "samples_per_pair", "seed"],
            "properties": {
                "k_tx": {"type": "integer", "minimum": 2},
                "m_rx": {"type": "integer", "minimum": 2},
                "samples_per_pair": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "day": {"type": "integer"},
                "normalize": {"type": "boolean"},
                "frame": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "length": {"type": "integer", "minimum": 2},
                        "pilot_len": {"type": "integer", "minimum": 0},
                    },
                },
                "tx_impairments": _RANGES_SCHEMA,
                "rx_impairments": _RANGES_SCHEMA,
                "channel": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "max_taps": {"type": "integer", "minimum": 1, "maximum": 8},
                        "tap_decay": {"type": "number", "minimum": 0},
                        "snr_db": {"type": "number"},
                    },
                },
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["preset"],
            "properties": {"preset": {"enum": ["desk", "paper"]}},
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "required": ["epochs", "batch_size", "learning_rate",
                         "lambda1", "lambda2", "lambda3", "seed"],
            "properties": {
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 2},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "lambda1": {"type": "number", "minimum": 0},
                "lambda2": {"type": "number", "minimum": 0},
                "lambda3": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
                "method": {"enum": ["drift", "erm", "mtl", "dann"]},
                "checkpoint_last_n": {"type": "integer", "minimum": 1},
                "grl_lambda": {"type": ["number", "null"], "minimum": 0},
                "detach_centroids": {"type": "boolean"},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "required": ["train_receivers", "test_receivers", "seeds"],
            "properties": {
                "train_receivers": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "test_receivers": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "days": {"type": "array", "items": {"type": "integer"}},
                "methods": {
                    "type": "array",
                    "items": {"enum": ["drift", "erm", "mtl", "dann"]},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig
    preset: str
    train: TrainConfig
    protocol: ProtocolSpec
    methods: tuple[str, ...]
    raw: dict

    @property
    def config_hash(self) -> str:
        return sha256_json(self.raw)


def _ranges(section: dict | None) -> ImpairmentRanges:
    if not section:
        return ImpairmentRanges()
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    return ImpairmentRanges(**kw)


def validate_dict(doc: dict) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{path}: {err.message}")
    return out


def from_dict(doc: dict) -> ExperimentConfig:
    violations = validate_dict(doc)
    if violations:
        raise SchemaError(violations)
    g = doc["generator"]
    generator = GeneratorConfig(
        k_tx=g["k_tx"], m_rx=g["m_rx"], samples_per_pair=g["samples_per_pair"],
        seed=g["seed"], day=g.get("day", 0),
        frame=FrameSpec(**g.get("frame", {})),
        tx_ranges=_ranges(g.get("tx_impairments")),
        rx_ranges=_ranges(g.get("rx_impairments")),
        channel=ChannelLaw(**g.get("channel", {})),
        normalize=g.get("normalize", True),
    )
    t = doc["train"]
    train = TrainConfig(
        epochs=t["epochs"], batch_size=t["batch_size"], learning_rate=t["learning_rate"],
        lambda1=t["lambda1"], lambda2=t["lambda2"], lambda3=t["lambda3"], seed=t["seed"],
        preset=doc["model"]["preset"], method=t.get("method", "drift"),
        checkpoint_last_n=t.get("checkpoint_last_n", 5),
        grl_lambda=t.get("grl_lambda"), detach_centroids=t.get("detach_centroids", False),
    )
    p = doc["protocol"]
    protocol = ProtocolSpec(
        train_receivers=tuple(p["train_receivers"]),
        test_receivers=tuple(p["test_receivers"]),
        seeds=tuple(p["seeds"]),
        days=tuple(p.get("days", ())),
    )
    methods = tuple(p.get("methods", ("drift", "erm", "mtl", "dann")))
    return ExperimentConfig(generator, doc["model"]["preset"], train, protocol, methods, doc)


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputOutputError(f"config not readable: {path}") from e
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise SchemaError([f"<root>: invalid JSON ({e})"]) from e
    if not isinstance(doc, dict):
        raise SchemaError(["<root>: config must be a JSON object"])
    return from_dict(doc)
