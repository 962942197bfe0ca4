"""Cross-receiver RF fingerprint lab: synthetic I/Q data, a small autodiff
engine, the disentangled adversarial training method, and its evaluation
protocols."""

__version__ = "0.1.0"
