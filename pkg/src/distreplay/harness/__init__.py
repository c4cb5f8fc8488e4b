"""Experiment runner: configs, sweeps, reports and plots."""
from .config import PRESETS, ExperimentConfig, build_config, load_config
from .experiment import METRICS_HEADER, run_experiment, run_one
