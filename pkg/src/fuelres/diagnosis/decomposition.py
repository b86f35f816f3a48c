"""Subsystem decomposition: local models driven by measured boundary values."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..twin.solver import FuelTwin, get_twin
from ..twin.topology import BAR, FAULT_NAMES, LEAK_FAULTS, OUTPUT_NAMES, NetworkTopology
from ..twin.window import MeasurementWindow
from .engine import Diagnosis, diagnose
from .estimate import FaultHypothesis


class InvalidCut(ValueError):
    """A subsystem boundary crosses a quantity that is not measured."""


@dataclass(frozen=True)
class Subsystem:
    name: str
    nodes: tuple[str, ...]
    pressure_inputs: tuple[str, ...]
    flow_inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    faults: tuple[int, ...]

    @property
    def boundary_inputs(self) -> tuple[str, ...]:
        return self.pressure_inputs + self.flow_inputs

    @property
    def leak_faults(self) -> tuple[int, ...]:
        return tuple(i for i in self.faults if i <= len(LEAK_FAULTS))


@dataclass(frozen=True)
class Decomposition:
    subsystems: tuple[Subsystem, ...]

    def fault_subsets(self, leaks_only: bool = False) -> list[tuple[int, ...]]:
        return [s.leak_faults if leaks_only else s.faults for s in self.subsystems]


class SubsystemTwin:
    """Steady-state model of one subsystem.

    Measured pressures at the cut become fixed-pressure nodes and measured
    flows across the cut become injections at the receiving node.
    """

    def __init__(self, topology: NetworkTopology, sub: Subsystem):
        self.subsystem = sub
        fixed_in = {topology.pressure_sensors[s]: s for s in sub.pressure_inputs}
        free = [n for n in sub.nodes if n not in fixed_in]
        free_set = set(free)
        inflow = {topology.flow_sensors[s]: s for s in sub.flow_inputs}
        edges, fixed = [], {}
        for e in topology.edges:
            ends = (e.src, e.dst)
            if not any(n in free_set for n in ends):
                continue
            if e.name in inflow:
                continue
            for n in ends:
                if n in free_set:
                    continue
                if n in fixed_in:
                    fixed[n] = 0.0
                elif n in topology.fixed_nodes:
                    fixed[n] = topology.fixed_nodes[n]
                else:
                    raise InvalidCut(f"{sub.name}: edge {e.name} crosses the cut at unsensed node {n}")
            edges.append(e)
        names = {e.name for e in edges}
        local = NetworkTopology(
            nodes=free,
            fixed_nodes=fixed,
            edges=edges,
            flow_sensors={s: topology.flow_sensors[s] for s in sub.outputs},
            pressure_sensors={},
            stuck_faults={f: v for f, v in topology.stuck_faults.items() if v in names},
        )
        self.twin = FuelTwin(local)
        self.output_names = self.twin.output_names
        # measured pressure columns feeding each fixed node
        self._p_cols = [
            (self.twin.fixed.index(n), OUTPUT_NAMES.index(s)) for n, s in fixed_in.items()
        ]
        edge_map = topology.edge_map
        self._inj = [
            (self.twin.free.index(edge_map[e].dst), OUTPUT_NAMES.index(s))
            for e, s in inflow.items()
        ]

    def boundary(self, y: np.ndarray) -> dict:
        y = np.atleast_2d(y)
        B = y.shape[0]
        p_fixed = np.tile(self.twin.p_fixed, (B, 1))
        for col, out in self._p_cols:
            p_fixed[:, col] = y[:, out] / BAR
        inj = np.zeros((B, self.twin.n_free))
        for node, out in self._inj:
            inj[:, node] += y[:, out]
        return {"p_fixed": p_fixed, "injection": inj}

    def solve(self, u, p, y_measured) -> np.ndarray:
        return self.twin.solve(u, p, **self.boundary(y_measured))

    def bind(self, window: MeasurementWindow, outputs):
        return _BoundSubsystem(self, window, outputs)


class _BoundSubsystem:
    def __init__(self, model: SubsystemTwin, window: MeasurementWindow, outputs):
        self.model = model
        self.u = window.u
        self.bnd = model.boundary(window.y)
        self.output_idx = np.asarray(outputs)
        self.cols = np.array([model.output_names.index(OUTPUT_NAMES[j]) for j in outputs])
        self.y = window.y[:, self.output_idx]
        self.n_evals = 0

    def evaluate(self, P):
        G, n = P.shape[0], self.u.shape[0]
        self.n_evals += G
        bnd = {k: np.tile(v, (G, 1)) for k, v in self.bnd.items()}
        out = self.model.twin.solve(np.tile(self.u, (G, 1)), np.repeat(P, n, axis=0), **bnd)
        return out[:, self.cols].reshape(G, n, -1)


def _local_faults(topology: NetworkTopology, free: set, edge_names: set) -> tuple[int, ...]:
    out = []
    for k, name in enumerate(FAULT_NAMES, start=1):
        if name in LEAK_FAULTS:
            if topology.leak_edges[name].src in free:
                out.append(k)
        elif topology.stuck_faults.get(name) in edge_names:
            out.append(k)
    return tuple(out)


def decompose(
    topology: NetworkTopology,
    sensors=None,
    subsystems: list[dict] | None = None,
) -> Decomposition:
    """Validate a subsystem split taken from configuration.

    Parameters
    ----------
    topology : NetworkTopology
    sensors : iterable of str, optional
        Available sensor names (all fourteen by default).
    subsystems : list of dict, optional
        Subsystem definitions; defaults to ``topology.subsystems``. Each entry
        has ``name``, ``nodes``, ``pressure_inputs``, ``flow_inputs`` and
        ``outputs``.

    Raises
    ------
    InvalidCut
        If a boundary quantity is unsensed or a cut edge is not covered.
    """
    sensors = set(OUTPUT_NAMES if sensors is None else sensors)
    specs = topology.subsystems if subsystems is None else subsystems
    if not specs:
        raise InvalidCut("no subsystems defined")
    built, seen = [], set()
    for sp in specs:
        name = sp["name"]
        pin = tuple(sp.get("pressure_inputs", ()))
        fin = tuple(sp.get("flow_inputs", ()))
        outs = tuple(sp.get("outputs", ()))
        for s in pin + fin + outs:
            if s not in sensors:
                raise InvalidCut(f"{name}: {s} is not an available sensor")
        for s in pin:
            if s not in topology.pressure_sensors:
                raise InvalidCut(f"{name}: {s} is not a pressure sensor")
        for s in fin:
            if s not in topology.flow_sensors:
                raise InvalidCut(f"{name}: {s} is not a flow sensor")
        sub = Subsystem(name, tuple(sp["nodes"]), pin, fin, outs, ())
        model = SubsystemTwin(topology, sub)  # raises InvalidCut on uncovered edges
        free = set(model.twin.free)
        faults = _local_faults(topology, free, set(model.twin.edge_names))
        if seen & set(faults):
            raise InvalidCut(f"{name}: fault subsets overlap on {sorted(seen & set(faults))}")
        seen |= set(faults)
        built.append(Subsystem(name, sub.nodes, pin, fin, outs, faults))
    return Decomposition(tuple(built))


def trivial_decomposition(topology: NetworkTopology) -> Decomposition:
    spec = [{
        "name": "whole",
        "nodes": list(topology.nodes),
        "pressure_inputs": [],
        "flow_inputs": [],
        "outputs": [f"massFlow_{i}" for i in range(1, 9)],
    }]
    return decompose(topology, subsystems=spec)


def diagnose_decomposed(
    window: MeasurementWindow,
    decomposition: Decomposition,
    twin: FuelTwin | None = None,
    worker_budget: int = 4,
    noise=None,
    leaks_only: bool = True,
    eps: float = 0.05,
    theta_amb: float = 0.5,
) -> dict[str, Diagnosis | Exception]:
    """Diagnose every subsystem on its own local model, concurrently.

    A failing subsystem yields its exception in the result instead of a
    Diagnosis; the others are unaffected.
    """
    topo = (twin or get_twin()).topology

    def run(sub: Subsystem):
        try:
            model = SubsystemTwin(topo, sub)
            faults = sub.leak_faults if leaks_only else sub.faults
            hyps = [FaultHypothesis(i, eps=eps) for i in faults]
            outs = [OUTPUT_NAMES.index(s) for s in sub.outputs]
            return sub.name, diagnose(window, hyps, model, worker_budget=1, noise=noise,
                                      theta_amb=theta_amb, outputs=outs)
        except Exception as exc:  # isolate per-subsystem failures
            return sub.name, exc

    t0 = time.perf_counter()
    subs = decomposition.subsystems
    with ThreadPoolExecutor(max_workers=max(1, min(worker_budget, len(subs)))) as pool:
        res = dict(pool.map(run, subs))
    res_time = time.perf_counter() - t0
    for v in res.values():
        if isinstance(v, Diagnosis):
            v.wall_time = res_time
    return res
