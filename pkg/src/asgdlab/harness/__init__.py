"""Rate fitting, cross-model experiments, configuration and the command line."""
from .config import ExperimentConfig, load_config, parse_config
from .experiments import compare_asgd_sme, speedup_experiment, threshold_sweep
from .rates import RateFit, fit_rate

__all__ = ["ExperimentConfig", "load_config", "parse_config", "compare_asgd_sme",
           "speedup_experiment", "threshold_sweep", "RateFit", "fit_rate"]
