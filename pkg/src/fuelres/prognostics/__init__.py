from .narx import (
    CANDIDATES,
    EstimateHistory,
    InsufficientData,
    NarxDegradation,
    RankDeficient,
    fit_degradation,
    forward_select,
    update,
)
from .rul import Prognoser, RulEstimate, estimate_rul, extrapolate

__all__ = [
    "CANDIDATES",
    "EstimateHistory",
    "InsufficientData",
    "NarxDegradation",
    "RankDeficient",
    "fit_degradation",
    "forward_select",
    "update",
    "Prognoser",
    "RulEstimate",
    "estimate_rul",
    "extrapolate",
]
