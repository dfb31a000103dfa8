"""Config-driven experiment runner."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .runner import COLUMNS, SCHEMA_VERSION, ExperimentReport, render_csv, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "COLUMNS", "SCHEMA_VERSION",
           "ExperimentReport", "render_csv", "run_experiment"]
