"""Frame-stacked and 3D-convolutional policy optimization on small grid games."""

from ._core import (
    ConfigError,
    Env,
    EnvError,
    HarnessError,
    aggregate,
    aggregate_runs,
    bootstrap_ci,
    compute_gae,
    env_names,
    final_score,
    iqm,
    median,
    optimality_gap,
    preset,
    preset_names,
    selfcheck,
    train,
)

__all__ = [
    "ConfigError",
    "Env",
    "EnvError",
    "HarnessError",
    "aggregate",
    "aggregate_runs",
    "bootstrap_ci",
    "compute_gae",
    "env_names",
    "final_score",
    "iqm",
    "median",
    "optimality_gap",
    "preset",
    "preset_names",
    "selfcheck",
    "train",
]
