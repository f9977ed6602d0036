"""Pseudo-marginal HMC samplers and diagnostics."""

from ._core import (
    ConfigError,
    DiagnosticError,
    Model,
    SamplerError,
    autocorrelation,
    cli,
    ess,
    sample,
)

__all__ = [
    "ConfigError",
    "DiagnosticError",
    "Model",
    "SamplerError",
    "autocorrelation",
    "cli",
    "ess",
    "sample",
]
