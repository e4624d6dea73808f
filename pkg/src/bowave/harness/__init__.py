"""Epsilon sweeps, power-law fits, persistence and the command line."""
from .config import RunConfig, config_hash, load_config
from .experiments import (ConvergenceRecord, residual_study, run_main_experiment,
                          run_perturbation_experiment, summarize)
from .fit import PowerLaw, fit_power_law

__all__ = ["RunConfig", "load_config", "config_hash", "ConvergenceRecord", "run_main_experiment",
           "run_perturbation_experiment", "residual_study", "summarize", "PowerLaw", "fit_power_law"]
