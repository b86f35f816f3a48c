"""Plans: timed action listings, text I/O and independent replay."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fsts import FSTS, TIME_PASSING, FstsState, Happening

_LINE = re.compile(r"^\s*(\d+(?:\.\d+)?):\s+(\w+)\s+(\w+)\s+\[(\d+(?:\.\d+)?)\]\s*$")


class ReplayDivergence(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class PlanStep:
    t: float
    action: str
    target: str
    duration: float = 0.0

    def line(self) -> str:
        return f"{self.t:.3f}: {self.action} {self.target} [{self.duration:.1f}]"


@dataclass
class Plan:
    """Timed actions plus the states the planner expects after each step."""

    steps: list[PlanStep]
    states: list[FstsState] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def to_text(self) -> str:
        return "".join(s.line() + "\n" for s in self.steps)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "Plan":
        steps = []
        for n, raw in enumerate(text.splitlines(), 1):
            if not raw.strip():
                continue
            m = _LINE.match(raw)
            if m is None:
                raise ValueError(f"line {n}: cannot parse {raw!r}")
            steps.append(PlanStep(float(m[1]), m[2], m[3], float(m[4])))
        if any(b.t < a.t for a, b in zip(steps, steps[1:])):
            raise ValueError("plan times must be non-decreasing")
        return cls(steps)

    @classmethod
    def read(cls, path) -> "Plan":
        return cls.from_text(Path(path).read_text())

    def stats_json(self) -> str:
        return json.dumps({**self.stats, **self.metrics}, indent=2)

    def actions_at(self, t: float, tol: float = 1e-6) -> list[PlanStep]:
        return [s for s in self.steps if abs(s.t - t) <= tol]


@dataclass
class Replay:
    states: list[FstsState]  # after each time-passing step; states[0] is the initial state
    metrics: dict


def _happening(fsts: FSTS, step: PlanStep) -> Happening:
    for h in fsts.actions:
        if h.name == step.action and h.target == step.target:
            return h
    raise KeyError(f"unknown action {step.action} {step.target}")


def plan_metrics(fsts: FSTS, start: FstsState, end: FstsState) -> dict:
    pr = fsts.problem
    dur = end.t - start.t
    drawn = sum(end.drawn) - sum(start.drawn)
    delivered = sum(end.delivered) - sum(start.delivered)
    j1, j2, r = pr.resilience(end)
    return {
        "fuel_delivered_pct": 100.0 * delivered / (sum(pr.reference_flow) * dur) if dur > 0 else float("nan"),
        "fuel_lost_pct": max(0.0, 100.0 * (drawn - delivered) / drawn) if drawn > 0 else 0.0,
        "J1": j1,
        "J2": j2,
        "R": r,
        "nominal": end.nominal_status,
        "dead": end.dead,
    }


def simulate_plan(plan: Plan, fsts: FSTS, strict: bool = False) -> Replay:
    """Run the plan through the transition function.

    With ``strict`` any guard failure, terminal event or difference from the
    plan's recorded states raises :class:`ReplayDivergence`. Otherwise events
    are recorded and the run carries on (terminal flags are kept but do not
    stop the dynamics) so that degraded plans, or the empty plan, can still be
    scored.
    """
    pr = fsts.problem
    for st in plan.steps:
        r = (st.t - pr.t_start) / pr.dt
        if abs(r - round(r)) > 1e-6 or st.t < pr.t_start - 1e-9 or st.t >= pr.horizon:
            raise ReplayDivergence(-1, f"action time {st.t} is not a decision point")
    s = fsts.initial_state()
    start = s
    states = [s]
    n_act = 0
    for k in range(pr.n_steps):
        t = pr.t_start + k * pr.dt
        flags = (s.nominal_status, s.dead, s.fired)
        s = replace(s, nominal_status=True, dead=False)
        for st in plan.actions_at(t):
            h = _happening(fsts, st)
            if not fsts.applicable(s, h):
                raise ReplayDivergence(n_act, f"guard of '{st.action} {st.target}' fails at t={t:.3f}")
            s = fsts.successor(s, h)
            n_act += 1
        s = fsts.successor(s, TIME_PASSING)
        if not strict:
            fired = flags[2] + tuple(x for x in s.fired[len(flags[2]):] if x not in flags[2])
            s = replace(s, nominal_status=s.nominal_status and flags[0], dead=s.dead or flags[1],
                        fired=fired, goal_reached=s.goal_reached and flags[0] and not flags[1])
        states.append(s)
        if strict:
            if s.terminal:
                raise ReplayDivergence(n_act, f"event {s.fired[-1]} at t={s.t:.3f}")
            if plan.states and k + 1 < len(plan.states):
                ref = plan.states[k + 1]
                if ref.config != s.config or not np.allclose(ref.vector(), s.vector(), rtol=0, atol=1e-6):
                    raise ReplayDivergence(n_act, f"state differs from the recorded one at t={s.t:.3f}")
    return Replay(states, plan_metrics(fsts, start, s))


def validate_plan(plan: Plan, fsts: FSTS) -> Replay:
    """Strict replay; raises :class:`ReplayDivergence` on the first mismatch."""
    return simulate_plan(plan, fsts, strict=True)
