"""Reconfiguration planning over a discretized temporal model of the network."""

from .fsts import (
    EVENTS,
    FSTS,
    NOMINAL_LEVEL,
    PUMP_LEVELS,
    TIME_PASSING,
    AttachmentFailure,
    ConfigError,
    FstsState,
    Happening,
    PlanningProblem,
    actions_between,
    candidate_configs,
    heuristic,
    heuristic_value,
)
from .plan import Plan, PlanStep, Replay, ReplayDivergence, plan_metrics, simulate_plan, validate_plan
from .search import Budget, SearchResult, plan
from .config import leak_degradation, load_problem, problem_from_dict


def build_fsts(problem: PlanningProblem, twin=None) -> FSTS:
    return FSTS(problem, twin)


__all__ = [
    "EVENTS",
    "FSTS",
    "NOMINAL_LEVEL",
    "PUMP_LEVELS",
    "TIME_PASSING",
    "AttachmentFailure",
    "ConfigError",
    "FstsState",
    "Happening",
    "PlanningProblem",
    "actions_between",
    "candidate_configs",
    "heuristic",
    "heuristic_value",
    "Plan",
    "PlanStep",
    "Replay",
    "ReplayDivergence",
    "plan_metrics",
    "simulate_plan",
    "validate_plan",
    "Budget",
    "SearchResult",
    "plan",
    "build_fsts",
    "leak_degradation",
    "load_problem",
    "problem_from_dict",
]
