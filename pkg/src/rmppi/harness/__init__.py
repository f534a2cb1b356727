from rmppi.harness.config import ExperimentConfig, load_experiment, parse_override
from rmppi.harness.io import read_trajectory, summarize, write_manifest, write_trajectory
from rmppi.harness.pipeline import (
    build_env,
    build_prior,
    cmd_ablate,
    cmd_fewshot,
    cmd_oracle_check,
    cmd_run,
    cmd_train_dynamics,
)

__all__ = [
    "ExperimentConfig",
    "build_env",
    "build_prior",
    "cmd_ablate",
    "cmd_fewshot",
    "cmd_oracle_check",
    "cmd_run",
    "cmd_train_dynamics",
    "load_experiment",
    "parse_override",
    "read_trajectory",
    "summarize",
    "write_manifest",
    "write_trajectory",
]
