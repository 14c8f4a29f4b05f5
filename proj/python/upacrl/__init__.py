"""Uniform-PAC linear bandit and linear MDP experiments."""

from ._core import (
    CertificationError,
    ConfigError,
    RegularizedDesign,
    audit,
    beta_bandit,
    beta_flute,
    certify_file,
    cli,
    level_capacity,
    run,
    stage_level_capacity,
    weight_norm_cap,
)

__all__ = [
    "CertificationError",
    "ConfigError",
    "RegularizedDesign",
    "audit",
    "beta_bandit",
    "beta_flute",
    "certify_file",
    "cli",
    "level_capacity",
    "run",
    "stage_level_capacity",
    "weight_norm_cap",
]
