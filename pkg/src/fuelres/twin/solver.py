"""Batched steady-state solver for the conductance network.

Every row of a batch is an independent steady state: node pressures solve a
grounded weighted Laplacian system. Pumps are Norton sources (a flow source
``gain * reference`` in parallel with a slip conductance back to the tank).
Pumps and engines carry check valves: an edge whose computed flow would
reverse is switched off and the row solved again, and a closed edge reopens
once it would carry forward flow.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .topology import BAR, FAULT_NAMES, INPUT_NAMES, OUTPUT_NAMES, NetworkTopology, load_topology
from .vectors import N_FAULTS, N_INPUTS, FaultVector, InputVector, OutputVector

CHECK_TOL = 1e-9  # kg/s
G_MIN = 1e-12  # kg/(s*bar); smaller conductances count as closed


class SingularNetwork(RuntimeError):
    """The pressure system of at least one row has no unique solution."""

    def __init__(self, message: str, rows=None):
        super().__init__(message)
        self.rows = [] if rows is None else list(rows)


class FuelTwin:
    """Compiled, reusable form of a :class:`NetworkTopology`.

    The object is immutable after construction so one instance can be shared
    between threads.

    Parameters
    ----------
    topology : NetworkTopology, optional
        Defaults to the bundled two-line fuel system.
    """

    def __init__(self, topology: NetworkTopology | None = None):
        topo = load_topology() if topology is None else topology
        self.topology = topo
        self.free = list(topo.nodes)
        self.fixed = list(topo.fixed_nodes)
        all_nodes = self.free + self.fixed
        idx = {n: i for i, n in enumerate(all_nodes)}
        nf = len(self.free)
        E = len(topo.edges)
        self.n_free = nf
        self.edge_names = [e.name for e in topo.edges]
        self.edge_index = {n: i for i, n in enumerate(self.edge_names)}

        D = np.zeros((E, len(all_nodes)))
        for k, e in enumerate(topo.edges):
            D[k, idx[e.src]] += 1.0
            D[k, idx[e.dst]] -= 1.0
        self.D = D
        self.Df = D[:, :nf]
        self.p_fixed = np.array([topo.fixed_nodes[n] for n in self.fixed])
        self.src_idx = np.array([idx[e.src] for e in topo.edges])
        self.dst_idx = np.array([idx[e.dst] for e in topo.edges])

        kinds = np.array([e.kind for e in topo.edges])
        self.kinds = kinds
        self.g_base = np.array(
            [e.slip if e.kind == "pump" else e.conductance for e in topo.edges], dtype=float
        )
        inp = {n: i for i, n in enumerate(INPUT_NAMES)}
        flt = {n: i for i, n in enumerate(FAULT_NAMES)}
        valve_of_stuck = {v: f for f, v in topo.stuck_faults.items()}

        self.valve_edges = np.flatnonzero(kinds == "valve")
        self.valve_ctrl = np.array([inp[topo.edges[k].control] for k in self.valve_edges], int)
        self.valve_stuck = np.array(
            [flt.get(valve_of_stuck.get(topo.edges[k].name, ""), -1) for k in self.valve_edges],
            int,
        )
        self.leak_edges = np.flatnonzero(kinds == "leak")
        self.leak_fault = np.array([flt[topo.edges[k].fault] for k in self.leak_edges], int)
        self.pump_edges = np.flatnonzero(kinds == "pump")
        self.pump_ctrl = np.array([inp[topo.edges[k].control] for k in self.pump_edges], int)
        self.pump_gain = np.array([topo.edges[k].gain for k in self.pump_edges])
        self.engine_edges = np.flatnonzero(kinds == "engine")
        # pumps and engines only pass flow forward
        self.check_edges = np.r_[self.pump_edges, self.engine_edges]

        self.node_index = idx
        flows = [n for n in OUTPUT_NAMES if n in topo.flow_sensors]
        pressures = [n for n in OUTPUT_NAMES if n in topo.pressure_sensors]
        self.output_names = flows + pressures
        self.flow_edges = np.array([self.edge_index[topo.flow_sensors[n]] for n in flows], int)
        self.pressure_nodes = np.array([idx[topo.pressure_sensors[n]] for n in pressures], int)

    # ------------------------------------------------------------------ #
    def conductances(self, u: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Edge conductances ``g`` (B, E) and source terms ``s`` (B, E)."""
        B = u.shape[0]
        g = np.broadcast_to(self.g_base, (B, self.g_base.size)).copy()
        opening = u[:, self.valve_ctrl]
        has_stuck = self.valve_stuck >= 0
        if has_stuck.any():
            stuck = p[:, self.valve_stuck[has_stuck]]
            sub = opening[:, has_stuck]
            np.copyto(sub, stuck, where=~np.isnan(stuck))
            opening[:, has_stuck] = sub
        g[:, self.valve_edges] *= opening
        g[:, self.leak_edges] *= p[:, self.leak_fault]
        g[g < G_MIN] = 0.0
        s = np.zeros_like(g)
        s[:, self.pump_edges] = u[:, self.pump_ctrl] * self.pump_gain
        return g, s

    def _anchored(self, g: np.ndarray) -> np.ndarray:
        """Boolean (B, N): node connected to a fixed-pressure node through g > 0."""
        B = g.shape[0]
        N = self.D.shape[1]
        adj = np.zeros((B, N, N))
        on = (g > 0).astype(float)
        rows = np.arange(B)[:, None]
        adj[rows, self.src_idx, self.dst_idx] += on
        adj[rows, self.dst_idx, self.src_idx] += on
        reach = np.zeros((B, N), bool)
        reach[:, self.n_free:] = True
        for _ in range(N):
            nxt = reach | ((adj @ reach[..., None].astype(float))[..., 0] > 0)
            if np.array_equal(nxt, reach):
                break
            reach = nxt
        return reach

    def _solve_pressures(self, g, s, p_fixed, extra) -> np.ndarray:
        nf = self.n_free
        anchored = self._anchored(g)
        float_nodes = ~anchored[:, :nf]
        # net source injection into each free node
        inj = -(s @ self.Df)
        if extra is not None:
            inj = inj + extra
        bad = np.flatnonzero((float_nodes & (np.abs(inj) > 0)).any(axis=1))
        if bad.size:
            raise SingularNetwork("source drives an isolated section", rows=bad)
        A = (self.Df.T[None] * g[:, None, :]) @ self.Df
        dx_pf = p_fixed @ self.D[:, nf:].T
        b = inj - (g * dx_pf) @ self.Df
        if float_nodes.any():
            keep = (~float_nodes).astype(float)
            A = A * keep[:, :, None] * keep[:, None, :]
            A[:, np.arange(nf), np.arange(nf)] += float_nodes
            b = b * keep
        try:
            P = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularNetwork(f"pressure system singular: {exc}") from exc
        if not np.all(np.isfinite(P)):
            raise SingularNetwork("non-finite pressures", rows=np.flatnonzero(~np.isfinite(P).all(1)))
        return np.concatenate([P, p_fixed], 1)

    def solve_state(self, u, p, p_fixed=None, injection=None) -> dict:
        """Full state for a batch: node pressures (bar), edge flows (kg/s) and masks.

        ``p_fixed`` (B, n_fixed) overrides the configured fixed-node pressures
        row by row and ``injection`` (B, n_free) adds external inflow (kg/s)
        at free nodes. Both exist for subsystem models whose boundary values
        come from measurements.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if u.shape[1] != N_INPUTS or p.shape[1] != N_FAULTS:
            raise ValueError("u must have 13 columns and p 19 columns")
        if u.shape[0] != p.shape[0]:
            if u.shape[0] == 1:
                u = np.repeat(u, p.shape[0], 0)
            elif p.shape[0] == 1:
                p = np.repeat(p, u.shape[0], 0)
            else:
                raise ValueError("u and p batch sizes differ")
        B = u.shape[0]
        if p_fixed is None:
            p_fixed = np.broadcast_to(self.p_fixed, (B, self.p_fixed.size))
        g_on, s_on = self.conductances(u, p)
        chk = self.check_edges
        on = np.ones((u.shape[0], chk.size), bool)
        for _ in range(4 * chk.size + 2):
            g = g_on.copy()
            s = s_on.copy()
            g[:, chk] *= on
            s[:, chk] *= on
            P = self._solve_pressures(g, s, p_fixed, injection)
            dp = P[:, self.src_idx] - P[:, self.dst_idx]
            q = g * dp + s
            # flow each check edge would carry if it were open
            q_open = g_on[:, chk] * dp[:, chk] + s_on[:, chk]
            # small dead band: a pump dead-heading into a closed section carries
            # zero flow up to rounding and must not chatter
            new_on = np.where(on, q[:, chk] >= -CHECK_TOL, q_open > CHECK_TOL)
            if np.array_equal(new_on, on):
                break
            on = new_on
        else:
            raise SingularNetwork("check valves did not settle")
        return {"pressure": P, "flow": q, "conductance": g, "check_open": on}

    def solve(self, u, p, **boundary) -> np.ndarray:
        """Noiseless outputs (B, n_out): flows in kg/s, pressures in Pa.

        Columns follow ``output_names`` (all 14 outputs for the full system).
        """
        st = self.solve_state(u, p, **boundary)
        return np.concatenate(
            [st["flow"][:, self.flow_edges], st["pressure"][:, self.pressure_nodes] * BAR], 1
        )

    def mass_residual(self, state: dict) -> np.ndarray:
        """Signed outflow sum at every free node (B, n_free)."""
        return state["flow"] @ self.Df

    def tank_engine_flows(self, u, p) -> tuple[np.ndarray, np.ndarray]:
        """Flows drawn from the tanks (B, 2) and delivered to the engines (B, 2)."""
        q = self.solve_state(u, p)["flow"]
        return q[:, self.pump_edges], q[:, self.engine_edges]


@lru_cache(maxsize=8)
def _default_twin() -> FuelTwin:
    return FuelTwin()


def get_twin(topology: NetworkTopology | None = None) -> FuelTwin:
    return _default_twin() if topology is None else FuelTwin(topology)


def solve_steady_state(
    topology: NetworkTopology | None, u: InputVector, p: FaultVector | None = None
) -> OutputVector:
    """Noiseless sensor readings for one operating point.

    Raises
    ------
    SingularNetwork
        If the pressure system has no unique solution.
    """
    twin = get_twin(topology)
    p = FaultVector.nominal() if p is None else p
    return OutputVector(twin.solve(u.values, p.values)[0])
