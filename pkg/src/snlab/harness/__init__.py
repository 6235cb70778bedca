from .config import ExperimentConfig, load_config, parse_config_text
from .runs import (
    COMMANDS,
    RunResult,
    run_acausality,
    run_linearity,
    run_omega_g,
    run_oracle_check,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config_text",
    "COMMANDS",
    "RunResult",
    "run_acausality",
    "run_linearity",
    "run_omega_g",
    "run_oracle_check",
]
