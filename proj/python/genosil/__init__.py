"""Safety-conditioned imitation learning with a CBF-QP expert."""

from ._core import (
    InfeasibleError,
    NumericalError,
    Policy,
    ValidationError,
    anneal_factor,
    cone_barrier,
    evaluate,
    generate,
    kl_loss,
    presets,
    project_onto_constraint,
    run_cli,
    sample_scenario,
    train,
)

__all__ = [
    "InfeasibleError",
    "NumericalError",
    "Policy",
    "ValidationError",
    "anneal_factor",
    "cone_barrier",
    "evaluate",
    "generate",
    "kl_loss",
    "presets",
    "project_onto_constraint",
    "run_cli",
    "sample_scenario",
    "train",
]
