"""Anytime minibatch dual averaging with delayed gradients, and its baselines."""
from .config import ExperimentConfig, load_config, parse_config_text
from .decentralized import WorkerGraph, build_comm_matrix, lambda2, min_consensus_rounds, run_decentralized
from .errors import ConfigError, InvariantError, NumericalError
from .experiment import run_experiment
from .hub import run_amb, run_ambdg, run_kbatch_async, run_scheme
from .trace import Record, Trace

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InvariantError",
    "NumericalError",
    "Record",
    "Trace",
    "WorkerGraph",
    "build_comm_matrix",
    "lambda2",
    "load_config",
    "min_consensus_rounds",
    "parse_config_text",
    "run_amb",
    "run_ambdg",
    "run_decentralized",
    "run_experiment",
    "run_kbatch_async",
    "run_scheme",
]
