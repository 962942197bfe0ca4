"""Cross-receiver evaluation: metrics, baselines, ablations, probes, and
divergence proxies."""

from .divergence import DivergenceReport, bound_report, divergence_report, proxy_divergence
from .methods import ABLATION_ROWS, ablation_grid, audit_protocol, method_train_config, run_method, sweep
from .metrics import MetricsRecord, ProtocolSpec, accuracy, batched_forward, evaluate, load_model
from .probes import ProbeReport, fit_linear_probe, probe_disentanglement

__all__ = [
    "ABLATION_ROWS", "DivergenceReport", "MetricsRecord", "ProbeReport",
    "ProtocolSpec", "ablation_grid", "accuracy", "audit_protocol",
    "batched_forward", "bound_report", "divergence_report", "evaluate",
    "fit_linear_probe", "load_model", "method_train_config",
    "probe_disentanglement", "proxy_divergence", "run_method", "sweep",
]
