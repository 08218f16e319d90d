from .config import ExperimentConfig, load_config, save_config
from .runner import RunArtifacts, run_audit, top3_frequency
from .sweeps import sweep_hyperparameters, sweep_sample_efficiency

__all__ = [
    "ExperimentConfig",
    "load_config",
    "save_config",
    "RunArtifacts",
    "run_audit",
    "top3_frequency",
    "sweep_hyperparameters",
    "sweep_sample_efficiency",
]
