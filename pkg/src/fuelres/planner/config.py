"""YAML problem files for the planner.

Example::

    dt: 100
    horizon: 1800
    faults: {leak_fault_5: 0.7, stuckAt_valve_11: 1.0}
    degradation: {fault: 5, profile: linear}   # optional, overrides the leak value
    initial:
      valves: {valve_8: 0, valve_15: 0, valve_16: 0}   # unlisted valves open
      pumps: [3.035, 3.035]
    constraints:
      engine_band: [0.7, 1.3]
      tank_capacity: [1890, 1890]
    heuristic: verbatim        # or plus
    search: {mode: first, nodes: 200000, seconds: 600}
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from ..twin.topology import VALVE_NAMES
from ..twin.vectors import FaultVector
from .fsts import ConfigError, PlanningProblem
from .search import Budget

_TOP = {"dt", "horizon", "t_start", "faults", "degradation", "initial", "constraints", "heuristic", "search",
        "metric", "reference_flow"}


def _pair(v, name):
    try:
        a, b = (float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair of numbers") from None
    return (a, b)


def leak_degradation(faults: np.ndarray, fault: int, profile: str):
    """``t -> fault vector`` with leak ``fault`` following a ground-truth profile."""
    from ..harness.profiles import degradation_profile

    if not 1 <= fault <= 8:
        raise ConfigError("degradation fault must be a leak id 1..8")
    base = np.asarray(faults, float).copy()

    def f(t):
        out = base.copy()
        out[fault - 1] = degradation_profile(profile, t)
        return out

    return f


def problem_from_dict(d: dict) -> tuple[PlanningProblem, Budget, str]:
    """Build ``(problem, budget, mode)`` from a parsed config mapping."""
    if not isinstance(d, dict):
        raise ConfigError("problem config must be a mapping")
    unknown = set(d) - _TOP
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    try:
        faults = FaultVector.from_dict(d.get("faults") or {}).values
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"faults: {exc}") from None
    kw: dict = {"faults": faults}
    for key in ("dt", "horizon", "t_start"):
        if key in d:
            kw[key] = float(d[key])
    init = d.get("initial") or {}
    if "valves" in init:
        v = init["valves"]
        if isinstance(v, dict):
            bad = set(v) - set(VALVE_NAMES)
            if bad:
                raise ConfigError(f"unknown valves: {sorted(bad)}")
            kw["initial_valves"] = tuple(int(v.get(n, 1)) for n in VALVE_NAMES)
        else:
            kw["initial_valves"] = tuple(int(x) for x in v)
        if any(x not in (0, 1) for x in kw["initial_valves"]):
            raise ConfigError("valve commands must be 0 or 1")
    if "pumps" in init:
        kw["initial_pumps"] = _pair(init["pumps"], "initial.pumps")
    cons = d.get("constraints") or {}
    if set(cons) - {"engine_band", "tank_capacity"}:
        raise ConfigError(f"unknown constraint keys: {sorted(set(cons) - {'engine_band', 'tank_capacity'})}")
    if "engine_band" in cons:
        kw["engine_band"] = _pair(cons["engine_band"], "engine_band")
    if "tank_capacity" in cons:
        kw["tank_capacity"] = _pair(cons["tank_capacity"], "tank_capacity")
    if "reference_flow" in d:
        kw["reference_flow"] = _pair(d["reference_flow"], "reference_flow")
    metric = d.get("metric") or {}
    if "beta" in metric:
        kw["metric_beta"] = _pair(metric["beta"], "metric.beta")
    if "alpha" in metric:
        kw["alpha"] = _pair(metric["alpha"], "metric.alpha")
    if "omega" in metric:
        kw["omega"] = float(metric["omega"])
    if "heuristic" in d:
        kw["heuristic_sign"] = str(d["heuristic"])
    deg = d.get("degradation")
    if deg:
        kw["degradation"] = leak_degradation(faults, int(deg.get("fault", 0)), str(deg.get("profile", "linear")))
    problem = PlanningProblem(**kw)
    s = d.get("search") or {}
    mode = str(s.get("mode", "first"))
    if mode not in ("first", "anytime"):
        raise ConfigError("search.mode must be 'first' or 'anytime'")
    try:
        budget = Budget(nodes=s.get("nodes", 200_000), seconds=s.get("seconds", 600.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return problem, budget, mode


def load_problem(path: str | Path) -> tuple[PlanningProblem, Budget, str]:
    try:
        d = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return problem_from_dict(d)
