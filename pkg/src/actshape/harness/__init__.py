"""Experiment configs, seeded runs, learning-curve files and plots."""
from .config import ConfigError, ExperimentConfig, config_from_json, load_config
from .curves import Aggregate, LearningCurve, aggregate, compare, read_curve, write_curve
from .presets import PRESETS, preset
from .runner import ExperimentResult, run_experiment, run_seed

__all__ = [
    "Aggregate",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "LearningCurve",
    "PRESETS",
    "aggregate",
    "compare",
    "config_from_json",
    "load_config",
    "preset",
    "read_curve",
    "run_experiment",
    "run_seed",
    "write_curve",
]
