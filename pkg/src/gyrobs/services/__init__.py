"""Gyrobs services."""

from .config_loader import ConfigError, ExperimentConfig, load_config
from .export import ExportService, read_run_csv
from .harness import (
    ComparisonError,
    DivergenceError,
    RateFitError,
    analyze_run,
    compare_observers,
    error_metrics,
    fit_exponential_rate,
    integrate_run,
    mahony_counterpart,
    time_to_threshold,
)
from .lyapunov import CertificateError, build_certificate, verify_decay
from .montecarlo import monte_carlo_global
from .observers import ObserverError
from .selfcheck import run_selfcheck

__all__ = [
    "CertificateError",
    "ComparisonError",
    "ConfigError",
    "DivergenceError",
    "ExperimentConfig",
    "ExportService",
    "ObserverError",
    "RateFitError",
    "analyze_run",
    "build_certificate",
    "compare_observers",
    "error_metrics",
    "fit_exponential_rate",
    "integrate_run",
    "load_config",
    "mahony_counterpart",
    "monte_carlo_global",
    "read_run_csv",
    "run_selfcheck",
    "time_to_threshold",
    "verify_decay",
]
