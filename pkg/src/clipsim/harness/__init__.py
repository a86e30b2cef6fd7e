"""End-to-end experiment orchestration."""

from .config import ExperimentConfig, POLICIES, config_from_dict, load_config
from .data import generate_dataset
from .experiment import ExperimentFailed, ExperimentResult, RoundRecord, run_experiment, run_policies
from .metrics import speedup_at_accuracy

__all__ = [
    "ExperimentConfig",
    "ExperimentFailed",
    "ExperimentResult",
    "POLICIES",
    "RoundRecord",
    "config_from_dict",
    "generate_dataset",
    "load_config",
    "run_experiment",
    "run_policies",
    "speedup_at_accuracy",
]
