from .estimate import (
    EstimationFailed,
    FaultHypothesis,
    SampleTrace,
    estimate_single_fault,
    leak_hypotheses,
)
from .probability import DegenerateLikelihood, entropy, fault_probabilities
from .engine import Diagnoser, Diagnosis, ambiguity_set, confusion_matrix, diagnose

__all__ = [
    "EstimationFailed",
    "FaultHypothesis",
    "SampleTrace",
    "estimate_single_fault",
    "leak_hypotheses",
    "DegenerateLikelihood",
    "entropy",
    "fault_probabilities",
    "Diagnoser",
    "Diagnosis",
    "ambiguity_set",
    "confusion_matrix",
    "diagnose",
]

from .decomposition import (
    Decomposition,
    InvalidCut,
    Subsystem,
    SubsystemTwin,
    decompose,
    diagnose_decomposed,
    trivial_decomposition,
)

__all__ += [
    "Decomposition",
    "InvalidCut",
    "Subsystem",
    "SubsystemTwin",
    "decompose",
    "diagnose_decomposed",
    "trivial_decomposition",
]
