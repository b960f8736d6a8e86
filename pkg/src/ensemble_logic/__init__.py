"""Unsupervised error-rate estimation for classifier ensembles with logic constraints."""

__version__ = "0.1.0"

__all__ = [
    "model",
    "logic",
    "config",
    "grounding",
    "admm",
    "estimator",
    "baselines",
    "scoring",
    "synth",
    "formats",
    "workspace",
    "artifacts",
    "logs",
    "orchestrator",
]
