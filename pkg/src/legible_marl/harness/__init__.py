"""Experiment harness: configs, sweeps, plots and verification suites."""
from .config import ExperimentConfig
from .runner import run, run_cell

__all__ = ["ExperimentConfig", "run", "run_cell"]
