"""Monte Carlo experiment harness and command-line entry point."""
from __future__ import annotations

from oic.harness.config import ExperimentConfig, load_config, parse_config
from oic.harness.runner import (
    ExperimentReport,
    ReportRow,
    SelectionRow,
    SweepRow,
    decision_quality,
    dro_sweep,
    run_experiment,
)
from oic.harness.selftest import run_selftest

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ReportRow",
    "SelectionRow",
    "SweepRow",
    "decision_quality",
    "dro_sweep",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_selftest",
]
