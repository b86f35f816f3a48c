"""Closed-loop scenario runs on the ground-truth twin.

Scenario 1 leaves the network alone. Scenario 2 diagnoses every window and
replans at each decision point against the current fault belief held
constant. Scenario 3 additionally feeds a prognosis forecast of the believed
leak to the planner.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..diagnosis.engine import Diagnosis, diagnose
from ..planner.fsts import FSTS, FstsState, PlanningProblem
from ..planner.plan import Plan, ReplayDivergence, _happening, validate_plan
from ..planner.search import Budget, plan as search
from ..prognostics.rul import Prognoser
from ..twin.solver import FuelTwin, get_twin
from ..twin.topology import OUTPUT_NAMES
from ..twin.vectors import NoiseModel, nominal_fault_array
from ..twin.window import MeasurementWindow, sense
from .bus import TopicBus
from .metric import ExecutionTrace, ResilienceParams, resilience
from .profiles import PROFILES, degradation_profile

log = logging.getLogger(__name__)

STATUS_SCORE, STATUS_X, STATUS_NONE = "score", "X", "-"
_IN = [OUTPUT_NAMES.index("massFlow_1"), OUTPUT_NAMES.index("massFlow_2")]
_OUT = [OUTPUT_NAMES.index("massFlow_7"), OUTPUT_NAMES.index("massFlow_8")]


@dataclass
class ScenarioConfig:
    """One campaign cell.

    ``fault = 0`` runs the nominal system. ``plan_seconds`` bounds each
    search, ``cell_budget`` the total planning time of the run.
    """

    scenario: int
    fault: int
    profile: str = "linear"
    dt: float = 100.0
    seed: int = 0
    horizon: float = 1800.0
    window: float = 10.0
    noise_flow: float = 0.01
    heuristic: str = "plus"
    plan_nodes: int | None = 200_000
    plan_seconds: float = 600.0
    cell_budget: float = 600.0
    tank_capacity: tuple[float, float] = (1890.0, 1890.0)
    belief_quantum: float = 0.01
    diagnose_open_loop: bool = False
    params: ResilienceParams = field(default_factory=ResilienceParams)

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise ValueError("scenario must be 1, 2 or 3")
        if not 0 <= self.fault <= 8:
            raise ValueError("fault must be a leak id 1..8 (0 for the nominal system)")
        if self.profile == "exponential":
            self.profile = "exp"
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}")
        for name, a, b in (("dt", self.dt, self.window), ("horizon", self.horizon, self.dt)):
            r = a / b
            if a <= 0 or abs(r - round(r)) > 1e-9:
                raise ValueError(f"{name}={a} is not a multiple of {b}")
        if abs(self.window - round(self.window)) > 1e-9 or self.window < 1:
            raise ValueError("window must be a whole number of 1 s samples")
        if abs(self.params.horizon - self.horizon) > 1e-9:
            self.params = ResilienceParams(self.params.y_ref, self.horizon, self.params.beta, self.params.alpha)

    def label(self) -> str:
        return f"s{self.scenario}_f{self.fault}_{self.profile}_dt{int(self.dt)}_seed{self.seed}"

    def true_faults(self, t: float) -> np.ndarray:
        p = nominal_fault_array()
        if self.fault:
            p[self.fault - 1] = degradation_profile(self.profile, t)
        return p


@dataclass
class CellResult:
    config: ScenarioConfig
    status: str
    J1: float | None
    J2: float | None
    R: float | None
    runtime_s: float
    planning_s: float
    searches: int
    replans: int
    actions: list[str]
    diag_latency: list[float] = field(default_factory=list)
    trace: ExecutionTrace | None = None
    metrics_raw: dict = field(default_factory=dict)  # J terms even when the status is X or -
    error: str | None = None


class _Belief:
    """Monotone single-fault belief built from diagnosis results."""

    def __init__(self):
        self.fault: int | None = None
        self.value = 0.0
        self.version = 0

    def update(self, d: Diagnosis) -> bool:
        b = d.best
        if b is None:
            return False
        est = float(d.estimates[b])
        if b != self.fault:
            self.fault, self.value = b, est
        elif est > self.value:
            self.value = est
        else:
            return False
        self.version += 1
        return True


def _ceil_q(x, q):
    return min(1.0, math.ceil(x / q - 1e-9) * q) if q > 0 else min(1.0, x)


def run_scenario(
    config: ScenarioConfig,
    twin: FuelTwin | None = None,
    bus: TopicBus | None = None,
    prognoser=None,
) -> CellResult:
    """Run one cell and score it.

    Parameters
    ----------
    prognoser : object with ``observe`` and ``forecast``, optional
        Scenario 3 only; defaults to :class:`~fuelres.prognostics.Prognoser`.
        A forecast of ``None`` falls back to the constant-fault belief.
    """
    cfg = config
    t_start = time.perf_counter()
    twin = get_twin() if twin is None else twin
    bus = TopicBus() if bus is None else bus
    T = int(round(cfg.horizon))
    W = int(round(cfg.window))
    DT = int(round(cfg.dt))
    rng = np.random.default_rng(cfg.seed)
    noise = NoiseModel.default(seed=cfg.seed, flow=cfg.noise_flow)
    closed = cfg.scenario in (2, 3)
    if cfg.scenario == 3 and prognoser is None:
        prognoser = Prognoser(p_max=0.8, max_horizon=cfg.horizon)

    base = FSTS(PlanningProblem(dt=cfg.dt, horizon=cfg.horizon, heuristic_sign=cfg.heuristic,
                                tank_capacity=cfg.tank_capacity), twin)
    ctl = base.initial_state()
    belief = _Belief()
    latency: list[float] = []
    y_in = np.zeros((T + 1, 2))
    y_out = np.zeros((T + 1, 2))
    st = {"status": STATUS_SCORE, "plan": None, "planning": 0.0, "searches": 0, "replans": 0}
    executed: list[str] = []

    def on_measurements(msg):
        t_end, win = msg
        if not (closed or cfg.diagnose_open_loop):
            return
        d = diagnose(win, noise=NoiseModel.default(flow=max(cfg.noise_flow, 1e-3)))
        latency.append(d.wall_time)
        bus.publish("diagnoses", (t_end, d))

    def on_diagnosis(msg):
        t_end, d = msg
        if not closed:
            return
        belief.update(d)
        if cfg.scenario == 3 and belief.fault is not None and d.best == belief.fault:
            prognoser.observe(belief.fault, t_end, float(d.estimates[belief.fault]))
            bus.publish("prognoses", (t_end, belief.fault))

    bus.subscribe("measurements", on_measurements)
    bus.subscribe("diagnoses", on_diagnosis)

    def make_problem(t_k: int) -> PlanningProblem:
        q = cfg.belief_quantum
        faults = nominal_fault_array()
        now = _ceil_q(belief.value, q)
        faults[belief.fault - 1] = now
        degradation = None
        if cfg.scenario == 3:
            f = prognoser.forecast(belief.fault, t_k, cfg.horizon - t_k)
            if f is not None:
                idx = belief.fault - 1

                def degradation(t, f=f, now=now, idx=idx, faults=faults):
                    p = faults.copy()
                    p[idx] = _ceil_q(max(now, f(t)), q)
                    return p

        drawn = y_in[:t_k].sum(0)
        delivered = y_out[:t_k].sum(0)
        yd = np.asarray(cfg.params.y_ref)
        return PlanningProblem(
            dt=cfg.dt, horizon=cfg.horizon, t_start=float(t_k), faults=faults, degradation=degradation,
            initial_valves=ctl.valves, initial_pumps=tuple(base.levels[list(ctl.pumps)]),
            initial_drawn=tuple(drawn), initial_delivered=tuple(delivered),
            initial_deviation=float(np.abs(yd - y_out[:t_k]).sum()),
            initial_imbalance=float(np.abs(y_out[:t_k] - y_in[:t_k]).sum()),
            tank_capacity=cfg.tank_capacity, metric_beta=cfg.params.beta, alpha=cfg.params.alpha,
            heuristic_sign=cfg.heuristic,
        )

    def decide(t_k: int):
        nonlocal ctl
        if not closed or st["status"] != STATUS_SCORE or belief.fault is None:
            return
        fsts = FSTS(make_problem(t_k), twin)
        inc: Plan | None = st["plan"]
        if inc is not None:
            suffix = Plan([s for s in inc.steps if s.t >= t_k - 1e-6])
            try:
                validate_plan(suffix, fsts)
            except ReplayDivergence:
                inc = None
        if inc is None:
            left = cfg.cell_budget - st["planning"]
            if left <= 0:
                st["status"] = STATUS_NONE
                return
            res = search(fsts, Budget(nodes=cfg.plan_nodes, seconds=min(cfg.plan_seconds, left)), mode="first")
            st["planning"] += res.stats.get("runtime_s", 0.0)
            st["searches"] += 1
            if res.best is None:
                st["status"] = STATUS_X if res.unrepairable else STATUS_NONE
                log.info("%s: planning at t=%d ended with status %s", cfg.label(), t_k, st["status"])
                return
            if st["plan"] is not None:
                st["replans"] += 1
            inc = res.best
            bus.publish("plans", (t_k, inc))
        st["plan"] = inc
        for step in inc.actions_at(t_k):
            ctl = base.successor(ctl, _happening(base, step))
            executed.append(step.line())

    k = 0
    while k <= T:
        if k % DT == 0 and k < T:
            decide(k)
        n = min(W, T + 1 - k)
        u = base.controls(ctl.valves, ctl.pumps)
        U = np.tile(u, (n, 1))
        P = np.array([cfg.true_faults(k + j) for j in range(n)])
        Y = twin.solve(U, P)
        y_in[k : k + n] = Y[:, _IN]
        y_out[k : k + n] = Y[:, _OUT]
        if n == W:
            win = MeasurementWindow(np.arange(k, k + n, dtype=float), U, sense(Y, noise, rng), Y)
            bus.publish("measurements", (k + n, win))
        k += n

    trace = ExecutionTrace(np.arange(T + 1, dtype=float), y_in, y_out,
                           {"scenario": cfg.scenario, "fault": cfg.fault, "profile": cfg.profile,
                            "dt": cfg.dt, "seed": cfg.seed})
    m = resilience(trace, cfg.params)
    ok = st["status"] == STATUS_SCORE
    return CellResult(
        config=cfg, status=st["status"],
        J1=m["J1"] if ok else None, J2=m["J2"] if ok else None, R=m["R"] if ok else None,
        runtime_s=time.perf_counter() - t_start, planning_s=st["planning"],
        searches=st["searches"], replans=st["replans"], actions=executed,
        diag_latency=latency, trace=trace, metrics_raw=m,
    )
