"""Masked-reconstruction anomaly detection for tabular data (C++ core)."""

from ._tabrad import (
    Config,
    ConfigError,
    ContractError,
    Error,
    FormatError,
    IoError,
    MetricError,
    NumericError,
    auroc,
    deterministic_bank,
    deterministic_bank_size,
    f1_score,
    gradcheck,
    run,
    sweep,
    synthetic,
    threshold_and_predict,
)

__all__ = [
    "Config",
    "ConfigError",
    "ContractError",
    "Error",
    "FormatError",
    "IoError",
    "MetricError",
    "NumericError",
    "auroc",
    "deterministic_bank",
    "deterministic_bank_size",
    "f1_score",
    "gradcheck",
    "run",
    "sweep",
    "synthetic",
    "threshold_and_predict",
]
