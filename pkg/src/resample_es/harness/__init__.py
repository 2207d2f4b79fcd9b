from .config import ExperimentConfig, load_config, parse_config
from .experiment import analyze_experiment, emit_plot_data, run_experiment, run_probe

__all__ = [
    "ExperimentConfig",
    "analyze_experiment",
    "emit_plot_data",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_probe",
]
