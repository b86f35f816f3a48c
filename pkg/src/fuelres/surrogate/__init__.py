"""Differentiable surrogate of the twin's mass flows and active disambiguation."""

from .data import N_FEATURES, TrainingSet, features, generate_training_data
from .disambiguation import (
    DesignResult,
    DisambiguationProblem,
    NoImprovement,
    OutOfDistribution,
    SeparationObjective,
    design_disambiguation_inputs,
    disambiguate,
    powell_baseline,
    surrogate_predict,
    train_surrogate,
    training_report,
    twin_separation,
    write_training_report,
)
from .mlp import MLPSurrogate, NonFinite

__all__ = [
    "N_FEATURES",
    "TrainingSet",
    "features",
    "generate_training_data",
    "DesignResult",
    "DisambiguationProblem",
    "NoImprovement",
    "OutOfDistribution",
    "SeparationObjective",
    "design_disambiguation_inputs",
    "disambiguate",
    "powell_baseline",
    "surrogate_predict",
    "train_surrogate",
    "training_report",
    "twin_separation",
    "write_training_report",
    "MLPSurrogate",
    "NonFinite",
]
