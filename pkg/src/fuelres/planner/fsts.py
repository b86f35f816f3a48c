"""Finite state temporal system over the fuel network.

States hold the commanded controls, the elapsed time and cumulative fuel
quantities. Happenings are instantaneous actions (open/close a valve,
step a pump up or down), the time-passing process (advance faults, call the
twin, integrate flows over one step) and the events it triggers.
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..twin.solver import FuelTwin, SingularNetwork, get_twin
from ..twin.topology import INPUT_NAMES, LEAK_FAULTS
from ..twin.vectors import N_INPUTS, nominal_fault_array

PUMP_LEVELS = (0.0, 1.0, 2.0, 3.0, 3.035, 4.0, 5.0)
NOMINAL_LEVEL = 3.035
Q = 1e-6  # quantum for cumulative quantities in state keys


class ConfigError(ValueError):
    pass


class AttachmentFailure(RuntimeError):
    """The twin could not evaluate a configuration (wraps SingularNetwork)."""


@dataclass(frozen=True)
class Happening:
    kind: str  # "action" | "process" | "event"
    name: str
    target: str = ""
    index: int = -1  # valve or pump position in the control vectors

    def __str__(self) -> str:
        return f"{self.name} {self.target}".strip()


TIME_PASSING = Happening("process", "time-passing")
EVENTS = (
    Happening("event", "engine_massflow_drop"),
    Happening("event", "engine_massflow_surge"),
    Happening("event", "tank_depleted"),
    Happening("event", "invalid_configuration"),
)


@dataclass(frozen=True)
class FstsState:
    """Planner state at one time point.

    ``valves`` are 0/1 commands, ``pumps`` indices into the pump grid.
    ``deviation`` integrates ``sum_i |y_ref_i - engine_i|`` and
    ``imbalance`` integrates ``sum_i |engine_i - tank_i|``.
    """

    t: float
    valves: tuple[int, ...]
    pumps: tuple[int, ...]
    drawn: tuple[float, float] = (0.0, 0.0)
    delivered: tuple[float, float] = (0.0, 0.0)
    deviation: float = 0.0
    imbalance: float = 0.0
    nominal_status: bool = True
    goal_reached: bool = False
    dead: bool = False
    fired: tuple[str, ...] = ()

    @property
    def config(self) -> tuple:
        return self.valves + self.pumps

    @property
    def terminal(self) -> bool:
        return self.dead or not self.nominal_status

    def key(self) -> tuple:
        qz = lambda x: int(round(x / Q))  # noqa: E731
        return (
            self.valves,
            self.pumps,
            tuple(qz(x) for x in self.drawn),
            tuple(qz(x) for x in self.delivered),
            qz(self.deviation),
            qz(self.imbalance),
            qz(self.t),
        )

    def vector(self) -> np.ndarray:
        return np.array([*self.drawn, *self.delivered, self.deviation, self.imbalance])


@dataclass
class PlanningProblem:
    """Problem definition.

    Parameters
    ----------
    dt, horizon : float
        Decision step and end time ``T`` (absolute seconds).
    t_start : float
        Time of the initial state (a multiple of ``dt``).
    faults : ndarray (19,)
        Fault vector used when no degradation model is given.
    degradation : callable, optional
        ``t -> fault vector``; overrides ``faults`` for leak evolution.
    tank_capacity : (float, float)
        Usable fuel per tank over the mission (kg).
    metric_beta : (float, float)
        Normalizers of the fuel-loss term of the resilience score.
    heuristic_sign : {"verbatim", "plus"}
    """

    dt: float = 100.0
    horizon: float = 1800.0
    t_start: float = 0.0
    faults: np.ndarray = field(default_factory=nominal_fault_array)
    degradation: Callable[[float], np.ndarray] | None = None
    initial_valves: tuple[int, ...] = (1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0)
    initial_pumps: tuple[float, float] = (NOMINAL_LEVEL, NOMINAL_LEVEL)
    initial_drawn: tuple[float, float] = (0.0, 0.0)
    initial_delivered: tuple[float, float] = (0.0, 0.0)
    initial_deviation: float = 0.0
    initial_imbalance: float = 0.0
    reference_flow: tuple[float, float] = (1.0, 1.0)
    engine_band: tuple[float, float] = (0.7, 1.3)
    tank_capacity: tuple[float, float] = (1890.0, 1890.0)
    metric_beta: tuple[float, float] = (3600.0, 3600.0)
    alpha: tuple[float, float] = (0.5, 0.5)
    omega: float = 1.5
    heuristic_sign: str = "verbatim"
    pump_levels: tuple[float, ...] = PUMP_LEVELS

    def __post_init__(self):
        self.faults = np.asarray(self.faults, float)
        if self.dt <= 0 or self.horizon <= self.t_start:
            raise ConfigError("need dt > 0 and horizon > t_start")
        for name, v in (("horizon", self.horizon), ("t_start", self.t_start)):
            r = v / self.dt
            if abs(r - round(r)) > 1e-9:
                raise ConfigError(f"dt={self.dt} does not divide {name}={v}")
        lo, hi = self.engine_band
        if not 0 < lo < hi:
            raise ConfigError("engine band must satisfy 0 < lo < hi")
        if min(self.tank_capacity) <= 0 or min(self.metric_beta) <= 0:
            raise ConfigError("capacities must be positive")
        if self.heuristic_sign not in ("verbatim", "plus"):
            raise ConfigError("heuristic_sign must be 'verbatim' or 'plus'")
        if any(a < 0 for a in self.alpha) or abs(sum(self.alpha) - 1) > 1e-9:
            raise ConfigError("alpha weights must be non-negative and sum to one")
        levels = list(self.pump_levels)
        if levels != sorted(set(levels)):
            raise ConfigError("pump levels must be strictly increasing")
        for v in self.initial_pumps:
            if not any(math.isclose(v, lv) for lv in levels):
                raise ConfigError(f"initial pump setting {v} is not on the pump grid")

    @property
    def n_steps(self) -> int:
        return int(round((self.horizon - self.t_start) / self.dt))

    def fault_at(self, t: float) -> np.ndarray:
        if self.degradation is None:
            return self.faults
        return np.asarray(self.degradation(t), float)

    def resilience(self, state: FstsState) -> tuple[float, float, float]:
        """``(J1, J2, R)`` of a terminal state over ``[0, T]``."""
        T = self.horizon
        j1 = state.deviation / ((T + 1) * sum(self.reference_flow))
        j2 = state.imbalance / sum(self.metric_beta)
        return j1, j2, 1.0 - self.alpha[0] * j1 - self.alpha[1] * j2


def heuristic_value(j1: float, j2: float, t: float, T: float, alpha=(0.5, 0.5), omega: float = 1.5,
                    sign: str = "verbatim") -> float:
    """``(a1 J1 -/+ a2 J2) * omega * (T - t) / T``; the minus form is the default."""
    s = -1.0 if sign == "verbatim" else 1.0
    return (alpha[0] * j1 + s * alpha[1] * j2) * omega * (T - t) / T


def heuristic(state: FstsState, problem: PlanningProblem) -> float:
    """Deviation terms measured up to ``state.t``; lower is better."""
    t = state.t
    j1 = state.deviation / ((t + 1) * sum(problem.reference_flow))
    j2 = state.imbalance / sum(problem.metric_beta)
    return heuristic_value(j1, j2, t, problem.horizon, problem.alpha, problem.omega, problem.heuristic_sign)


class FSTS:
    """Grounded transition system for one :class:`PlanningProblem`.

    The twin is the semantic attachment; results are cached per
    (configuration, fault vector).
    """

    def __init__(self, problem: PlanningProblem, twin: FuelTwin | None = None):
        self.problem = problem
        self.twin = get_twin() if twin is None else twin
        topo = self.twin.topology
        # control-vector order (valve_6 .. valve_16), not edge declaration order
        valves = sorted((e for e in topo.edges if e.kind == "valve"), key=lambda e: INPUT_NAMES.index(e.control))
        pumps = sorted((e for e in topo.edges if e.kind == "pump"), key=lambda e: INPUT_NAMES.index(e.control))
        self.valve_names = [e.name for e in valves]
        self.pump_names = [e.name for e in pumps]
        if len(problem.initial_valves) != len(valves):
            raise ConfigError(f"initial_valves has {len(problem.initial_valves)} entries, network has {len(valves)} valves")
        if len(problem.initial_pumps) != len(pumps):
            raise ConfigError("initial_pumps does not match the number of pumps")
        self.valve_cols = np.array([INPUT_NAMES.index(e.control) for e in valves], int)
        self.pump_cols = np.array([INPUT_NAMES.index(e.control) for e in pumps], int)
        self.levels = np.asarray(problem.pump_levels, float)
        acts = []
        for i, n in enumerate(self.valve_names):
            acts += [Happening("action", "open", n, i), Happening("action", "close", n, i)]
        for i, n in enumerate(self.pump_names):
            acts += [Happening("action", "increase", n, i), Happening("action", "decrease", n, i)]
        self.actions = tuple(acts)
        self.engine_idx = self.twin.engine_edges
        self.pump_idx = self.twin.pump_edges
        self._cache: dict = {}
        self.table_cache: dict = {}  # per fault vector, filled by the search

    # -- controls -----------------------------------------------------------
    def level_index(self, value: float) -> int:
        return int(np.argmin(np.abs(self.levels - value)))

    def controls(self, valves, pumps) -> np.ndarray:
        u = np.zeros(N_INPUTS)
        u[self.valve_cols] = valves
        u[self.pump_cols] = self.levels[list(pumps)]
        return u

    def controls_batch(self, V: np.ndarray, Pidx: np.ndarray) -> np.ndarray:
        U = np.zeros((V.shape[0], N_INPUTS))
        U[:, self.valve_cols] = V
        U[:, self.pump_cols] = self.levels[Pidx]
        return U

    def initial_state(self) -> FstsState:
        pr = self.problem
        return FstsState(
            t=pr.t_start,
            valves=tuple(int(v) for v in pr.initial_valves),
            pumps=tuple(self.level_index(v) for v in pr.initial_pumps),
            drawn=tuple(pr.initial_drawn),
            delivered=tuple(pr.initial_delivered),
            deviation=pr.initial_deviation,
            imbalance=pr.initial_imbalance,
        )

    # -- attachment -----------------------------------------------------------
    def attachment(self, valves, pumps, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tank draws and engine flows for one configuration."""
        key = (tuple(valves), tuple(pumps), np.asarray(p, float).tobytes())
        hit = self._cache.get(key)
        if hit is None:
            u = self.controls(valves, pumps)
            try:
                st = self.twin.solve_state(u[None], np.asarray(p, float)[None])
            except SingularNetwork as exc:
                raise AttachmentFailure(str(exc)) from exc
            q = st["flow"][0]
            hit = (q[self.pump_idx].copy(), q[self.engine_idx].copy())
            self._cache[key] = hit
        return hit

    def table(self, V: np.ndarray, Pidx: np.ndarray, p: np.ndarray):
        """Batched attachment: draws (n, 2), engines (n, 2), ok mask (n,)."""
        U = self.controls_batch(V, Pidx)
        P = np.broadcast_to(np.asarray(p, float), (U.shape[0], len(p)))
        try:
            st = self.twin.solve_state(U, P)
            ok = np.ones(U.shape[0], bool)
        except SingularNetwork as exc:
            ok = np.ones(U.shape[0], bool)
            ok[exc.rows] = False
            st = self.twin.solve_state(U[ok], P[ok]) if ok.any() else None
            q = np.zeros((U.shape[0], len(self.twin.edge_names)))
            if st is not None:
                q[ok] = st["flow"]
            return q[:, self.pump_idx], q[:, self.engine_idx], ok
        q = st["flow"]
        return q[:, self.pump_idx], q[:, self.engine_idx], ok

    # -- transitions ------------------------------------------------------------
    def applicable(self, state: FstsState, h: Happening) -> bool:
        if state.terminal or state.goal_reached:
            return False
        if h.kind == "process":
            return state.t < self.problem.horizon - 1e-9
        if h.kind != "action":
            return False
        if h.name == "open":
            return state.valves[h.index] == 0
        if h.name == "close":
            return state.valves[h.index] == 1
        if h.name == "increase":
            return state.pumps[h.index] < len(self.levels) - 1
        if h.name == "decrease":
            return state.pumps[h.index] > 0
        return False

    def successor(self, state: FstsState, h: Happening) -> FstsState:
        """Pure transition function; dead states map to themselves."""
        if state.terminal:
            return state
        if not self.applicable(state, h):
            raise ValueError(f"{h} not applicable at t={state.t}")
        if h.kind == "action":
            if h.name in ("open", "close"):
                v = list(state.valves)
                v[h.index] = 1 if h.name == "open" else 0
                return replace(state, valves=tuple(v))
            pm = list(state.pumps)
            pm[h.index] += 1 if h.name == "increase" else -1
            return replace(state, pumps=tuple(pm))
        return self._pass_time(state)

    def _pass_time(self, state: FstsState) -> FstsState:
        pr = self.problem
        t1 = state.t + pr.dt
        p = pr.fault_at(t1)
        try:
            d, e = self.attachment(state.valves, state.pumps, p)
        except AttachmentFailure:
            return replace(state, t=t1, dead=True, fired=state.fired + ("invalid_configuration",))
        return self.integrate(state, d, e)

    def integrate(self, state: FstsState, d, e) -> FstsState:
        """Accumulate constant flows over one step, then fire events."""
        pr = self.problem
        dt = pr.dt
        t1 = state.t + dt
        yd = pr.reference_flow
        drawn = tuple(state.drawn[i] + d[i] * dt for i in range(2))
        delivered = tuple(state.delivered[i] + e[i] * dt for i in range(2))
        dev = state.deviation + sum(abs(yd[i] - e[i]) for i in range(2)) * dt
        imb = state.imbalance + sum(abs(e[i] - d[i]) for i in range(2)) * dt
        fired = list(state.fired)
        nominal, dead = state.nominal_status, False
        lo, hi = pr.engine_band
        if any(e[i] < lo * yd[i] for i in range(2)):
            fired.append("engine_massflow_drop")
            nominal = False
        if any(e[i] > hi * yd[i] for i in range(2)):
            fired.append("engine_massflow_surge")
            nominal = False
        if any(drawn[i] > pr.tank_capacity[i] + Q for i in range(2)):
            fired.append("tank_depleted")
            dead = True
        goal = nominal and not dead and t1 >= pr.horizon - 1e-9
        return FstsState(t1, state.valves, state.pumps, drawn, delivered, dev, imb,
                         nominal, goal, dead or not nominal, tuple(fired))


# -- candidate configurations --------------------------------------------------------

_CANDIDATES: "weakref.WeakKeyDictionary[FuelTwin, dict]" = weakref.WeakKeyDictionary()


def candidate_configs(fsts: FSTS) -> tuple[np.ndarray, np.ndarray]:
    """Configurations that can keep both engines above the lower band.

    Leaks only lower engine flows, so a configuration that starves an engine
    with every leak at zero (stuck faults as given) starves it for any leak
    level; the rest form the candidate set for every step. Returns valve
    commands (n, n_valves) and pump level indices (n, n_pumps).
    """
    pr = fsts.problem
    base = pr.fault_at(pr.t_start).copy()
    base[: len(LEAK_FAULTS)] = 0.0
    key = (base.tobytes(), tuple(pr.pump_levels), pr.engine_band[0], tuple(pr.reference_flow))
    per_twin = _CANDIDATES.setdefault(fsts.twin, {})
    if key not in per_twin:
        V = np.array(list(itertools.product((0, 1), repeat=len(fsts.valve_names))), int)
        L = np.array(list(itertools.product(range(len(fsts.levels)), repeat=len(fsts.pump_names))), int)
        VV = np.repeat(V, len(L), axis=0)
        PP = np.tile(L, (len(V), 1))
        keep = np.zeros(len(VV), bool)
        floor = pr.engine_band[0] * np.asarray(pr.reference_flow) - 1e-12
        for s in range(0, len(VV), 20_000):
            _, e, ok = fsts.table(VV[s : s + 20_000], PP[s : s + 20_000], base)
            keep[s : s + 20_000] = ok & (e >= floor).all(axis=1)
        per_twin[key] = (VV[keep], PP[keep])
    return per_twin[key]


def actions_between(fsts: FSTS, src: FstsState, valves: Sequence[int], pumps: Sequence[int]) -> list[Happening]:
    """Instantaneous actions turning ``src``'s controls into the target ones.

    Order: valve closures, valve openings (both by valve position), then pump
    steps pump by pump.
    """
    out = []
    by = {(h.name, h.index): h for h in fsts.actions}
    for i, (a, b) in enumerate(zip(src.valves, valves)):
        if a == 1 and b == 0:
            out.append(by[("close", i)])
    for i, (a, b) in enumerate(zip(src.valves, valves)):
        if a == 0 and b == 1:
            out.append(by[("open", i)])
    for i, (a, b) in enumerate(zip(src.pumps, pumps)):
        step = "increase" if b > a else "decrease"
        out += [by[(step, i)]] * abs(int(b) - int(a))
    return out
