from .config import PRESETS, ConfigError, ExperimentConfig, build_config, load_config, preset
from .experiments import (
    ExperimentResult, run_custom_sweep, run_error_vs_r_experiment, run_experiment,
    run_relative_error_experiment, run_series_experiment,
)
from .output import Check, Table, emit_csv, read_csv, write_summary
from .stats import relative_error, sample_moments
