"""Anytime best-first search over macro-steps of the FSTS.

A macro-step is one decision point: a batch of instantaneous actions (each
valve toggled at most once, each pump moved at most one grid step) followed
by the time-passing process. Because valves can be set freely at every
decision point, the only control that carries over between steps is the pump
pair, so two states at the same time with the same pumps compare on their
cumulative quantities alone. That gives two sound prunings:

* a backward Pareto sweep over cumulative tank draws tells, for each time and
  pump pair, which draw vectors can still reach the horizon without an event;
  an unviable root proves the problem unsolvable;
* a per (time, pump pair) archive drops states whose draws, deviation and
  imbalance are all no better than an already generated one.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .fsts import FSTS, Q, TIME_PASSING, actions_between, candidate_configs, heuristic_value
from .plan import Plan, PlanStep, simulate_plan


@dataclass
class Budget:
    """Search limits; ``None`` means unlimited."""

    nodes: int | None = 200_000
    seconds: float | None = 600.0

    def __post_init__(self):
        if self.nodes is not None and self.nodes <= 0:
            raise ValueError("node budget must be positive")
        if self.seconds is not None and self.seconds <= 0:
            raise ValueError("time budget must be positive")


@dataclass
class SearchResult:
    plans: list[Plan]
    exhausted: bool  # open list emptied (or root proven unviable)
    expired: bool  # stopped by the budget
    stats: dict = field(default_factory=dict)

    @property
    def unrepairable(self) -> bool:
        return self.exhausted and not self.plans

    @property
    def best(self) -> Plan | None:
        return self.plans[0] if self.plans else None


def pareto2(P: np.ndarray) -> np.ndarray:
    """Minimal points of a 2-D set, sorted by the first coordinate."""
    if len(P) == 0:
        return P.reshape(0, 2)
    order = np.lexsort((P[:, 1], P[:, 0]))
    P = P[order]
    run = np.minimum.accumulate(P[:, 1])
    keep = np.ones(len(P), bool)
    keep[1:] = P[1:, 1] < run[:-1] - Q
    return P[keep]


def _dominated(X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Rows of ``X`` weakly dominated (within ``Q``) by some row of ``A``."""
    if len(A) == 0 or len(X) == 0:
        return np.zeros(len(X), bool)
    return (A[None, :, :] <= X[:, None, :] + Q).all(-1).any(1)


def _pareto_nd(X: np.ndarray) -> np.ndarray:
    """Mask of rows not weakly dominated by an earlier row or strictly by any row."""
    n = len(X)
    if n <= 1:
        return np.ones(n, bool)
    le = (X[None, :, :] <= X[:, None, :] + Q).all(-1)  # le[i, j]: row j <= row i
    lt = le & ~(X[:, None, :] <= X[None, :, :] + Q).all(-1)  # j strictly better than i
    earlier = np.tril(le, -1)  # ties resolved in favour of the earlier row
    return ~(lt.any(1) | earlier.any(1))


class StepTables:
    """Twin outputs for every candidate configuration at every step."""

    def __init__(self, fsts: FSTS):
        self.fsts = fsts
        pr = fsts.problem
        self.V, self.P = candidate_configs(fsts)
        L = len(fsts.levels)
        self.n_levels = L
        shape = (L,) * self.P.shape[1]
        self.pair = np.ravel_multi_index(self.P.T, shape)
        self.n_pairs = L ** self.P.shape[1]
        grid = np.array(np.unravel_index(np.arange(self.n_pairs), shape)).T
        # pump pairs reachable from each other within one decision point
        self.adjacency = (np.abs(grid[:, None, :] - grid[None, :, :]) <= 1).all(-1)
        self.n = pr.n_steps
        self.times = pr.t_start + pr.dt * np.arange(self.n + 1)
        self.cost: list[np.ndarray] = []  # (m, 4): draw1, draw2, deviation, imbalance
        self.valid: list[np.ndarray] = []
        lo, hi = pr.engine_band
        yd = np.asarray(pr.reference_flow)
        for k in range(self.n):
            p = pr.fault_at(self.times[k + 1])
            key = np.asarray(p, float).tobytes()
            if key not in fsts.table_cache:
                d, e, ok = fsts.table(self.V, self.P, p)
                fsts.table_cache[key] = (d, e, ok)
            d, e, ok = fsts.table_cache[key]
            valid = ok & (e >= lo * yd).all(1) & (e <= hi * yd).all(1)
            dt = pr.dt
            c = np.column_stack([d * dt, np.abs(yd - e).sum(1) * dt, np.abs(e - d).sum(1) * dt])
            self.cost.append(c)
            self.valid.append(valid)

    def pair_id(self, pumps) -> int:
        return int(np.ravel_multi_index(tuple(int(x) for x in pumps), (self.n_levels,) * self.P.shape[1]))


class Viability:
    """Backward Pareto fronts of remaining tank draws per (step, pump pair)."""

    def __init__(self, tables: StepTables, slack: np.ndarray):
        self.slack = slack
        n, npairs = tables.n, tables.n_pairs
        adj = tables.adjacency
        zero = np.zeros((1, 2))
        self.front: list[list[np.ndarray]] = [None] * (n + 1)
        self.front[n] = [zero] * npairs
        for k in range(n - 1, -1, -1):
            g = []
            for q in range(npairs):
                m = tables.valid[k] & (tables.pair == q)
                nxt = self.front[k + 1][q]
                if not m.any() or len(nxt) == 0:
                    g.append(np.zeros((0, 2)))
                    continue
                own = pareto2(tables.cost[k][m, :2])
                s = (own[:, None, :] + nxt[None, :, :]).reshape(-1, 2)
                s = s[(s <= slack + Q).all(1)]
                g.append(pareto2(s))
            self.front[k] = [pareto2(np.vstack([g[j] for j in np.flatnonzero(adj[q])])) for q in range(npairs)]

    def viable(self, k: int, pair: np.ndarray, drawn: np.ndarray) -> np.ndarray:
        """Vectorized test over rows (pump pair id, cumulative draw since start)."""
        out = np.zeros(len(pair), bool)
        for q in np.unique(pair):
            f = self.front[k][q]
            rows = np.flatnonzero(pair == q)
            if len(f) == 0:
                continue
            room = self.slack - drawn[rows]
            idx = np.searchsorted(f[:, 0], room[:, 0] + Q, side="right") - 1
            ok = idx >= 0
            ok[ok] = f[idx[ok], 1] <= room[ok, 1] + Q
            out[rows] = ok
        return out


def plan(fsts: FSTS, budget: Budget | None = None, mode: str = "first", dive: bool = True) -> SearchResult:
    """Search for timed reconfiguration plans.

    Parameters
    ----------
    fsts : FSTS
    budget : Budget, optional
    mode : {"first", "anytime"}
        ``first`` stops at the first goal; ``anytime`` keeps every goal found
        until the open list or the budget runs out.
    dive : bool
        Until the first goal is found, expand the best child of the node just
        expanded before going back to the open list. Every generated node can
        reach the horizon, so the first dive ends at a goal after one
        expansion per step. Without it the heuristic is followed strictly,
        which on leaking networks widens into a layer-by-layer sweep.

    Returns
    -------
    SearchResult
        Plans ranked by resilience (ties: fewer actions).
    """
    if mode not in ("first", "anytime"):
        raise ValueError("mode must be 'first' or 'anytime'")
    budget = Budget() if budget is None else budget
    t0 = time.perf_counter()
    pr = fsts.problem
    root = fsts.initial_state()
    tables = StepTables(fsts)
    slack = np.asarray(pr.tank_capacity, float) - np.asarray(root.drawn)
    via = Viability(tables, slack)
    root_pair = tables.pair_id(root.pumps)
    t_tables = time.perf_counter() - t0
    stats = {"candidates": int(len(tables.V)), "steps": tables.n, "setup_s": t_tables}

    adj_pairs = tables.adjacency

    if not via.viable(0, np.array([root_pair]), np.zeros((1, 2)))[0]:
        stats.update(expanded=0, generated=0, runtime_s=time.perf_counter() - t0)
        return SearchResult([], exhausted=True, expired=False, stats=stats)

    # node storage
    par = [-1]
    cfg = [-1]
    kk = [0]
    vec = [np.array([0.0, 0.0, root.deviation, root.imbalance])]
    pairs = [root_pair]
    nact = [0]
    archive: dict[tuple[int, int], np.ndarray] = {}
    counter = itertools.count()
    open_: list = [(heuristic_value(0, 0, root.t, pr.horizon, pr.alpha, pr.omega, pr.heuristic_sign), -root.t, next(counter), 0)]
    goals: list[int] = []
    expanded = generated = 0
    expired = False
    yd_sum = sum(pr.reference_flow)
    beta_sum = sum(pr.metric_beta)
    root_valves = np.asarray(root.valves)
    root_pumps = np.asarray(root.pumps)

    done: set[int] = set()
    nxt: int | None = None
    while open_ or nxt is not None:
        if (budget.nodes is not None and expanded >= budget.nodes) or (
            budget.seconds is not None and time.perf_counter() - t0 > budget.seconds
        ):
            expired = True
            break
        if nxt is not None:
            nid, nxt = nxt, None
        else:
            nid = heapq.heappop(open_)[3]
            if nid in done:
                continue
        done.add(nid)
        expanded += 1
        k = kk[nid]
        src_v = root_valves if cfg[nid] < 0 else tables.V[cfg[nid]]
        src_p = root_pumps if cfg[nid] < 0 else tables.P[cfg[nid]]
        m = tables.valid[k] & adj_pairs[pairs[nid]][tables.pair]
        idx = np.flatnonzero(m)
        if idx.size == 0:
            continue
        child = vec[nid] + tables.cost[k][idx]
        ok = via.viable(k + 1, tables.pair[idx], child[:, :2])
        idx, child = idx[ok], child[ok]
        if idx.size == 0:
            continue
        acts = (tables.V[idx] != src_v).sum(1) + np.abs(tables.P[idx] - src_p).sum(1)
        # identical outcomes: keep the configuration needing fewest actions
        qv = np.round(child / Q).astype(np.int64)
        order = np.lexsort((acts, *qv.T[::-1], tables.pair[idx]))
        idx, child, acts, qv = idx[order], child[order], acts[order], qv[order]
        key = np.column_stack([tables.pair[idx], qv])
        first = np.ones(len(idx), bool)
        first[1:] = (key[1:] != key[:-1]).any(1)
        idx, child, acts = idx[first], child[first], acts[first]
        keep = np.zeros(len(idx), bool)
        for q in np.unique(tables.pair[idx]):
            rows = np.flatnonzero(tables.pair[idx] == q)
            rows = rows[np.argsort(acts[rows], kind="stable")]
            nd = _pareto_nd(child[rows])
            rows = rows[nd]
            A = archive.get((k + 1, int(q)))
            if A is not None:
                rows = rows[~_dominated(child[rows], A)]
            if rows.size:
                keep[rows] = True
                new = child[rows]
                archive[(k + 1, int(q))] = new if A is None else np.vstack([A[~_dominated(A, new)], new])
        idx, child, acts = idx[keep], child[keep], acts[keep]
        generated += idx.size
        t1 = tables.times[k + 1]
        is_goal = k + 1 == tables.n
        base = len(par)
        for j in range(idx.size):
            par.append(nid)
            cfg.append(int(idx[j]))
            kk.append(k + 1)
            vec.append(child[j])
            pairs.append(int(tables.pair[idx[j]]))
            nact.append(nact[nid] + int(acts[j]))
        if is_goal:
            goals.extend(range(base, base + idx.size))
            if mode == "first":
                break
            continue
        j1 = child[:, 2] / ((t1 + 1) * yd_sum)
        j2 = child[:, 3] / beta_sum
        h = heuristic_value(j1, j2, t1, pr.horizon, pr.alpha, pr.omega, pr.heuristic_sign)
        for j in range(idx.size):
            heapq.heappush(open_, (float(h[j]), -t1, next(counter), base + j))
        if dive and not goals and idx.size:
            nxt = base + int(np.argmin(h))

    stats.update(expanded=expanded, generated=generated, open=len(open_),
                 archive=int(sum(len(a) for a in archive.values())))

    def score(g):
        v = vec[g]
        j1 = v[2] / ((pr.horizon + 1) * yd_sum)
        j2 = v[3] / beta_sum
        return 1 - pr.alpha[0] * j1 - pr.alpha[1] * j2

    goals.sort(key=lambda g: (-score(g), nact[g], g))
    if mode == "first":
        goals = goals[:1]
    plans = [_build(fsts, tables, g, par, cfg) for g in goals[:50]]
    stats["runtime_s"] = time.perf_counter() - t0
    for p in plans:
        p.stats = {**stats, "actions": len(p.steps)}
    exhausted = not open_ and nxt is None and not expired and not (mode == "first" and goals)
    return SearchResult(plans, exhausted=exhausted, expired=expired and not plans, stats=stats)


def _build(fsts: FSTS, tables: StepTables, goal: int, par, cfg) -> Plan:
    chain = []
    n = goal
    while par[n] >= 0:
        chain.append(cfg[n])
        n = par[n]
    chain.reverse()
    steps = []
    s = fsts.initial_state()
    for k, c in enumerate(chain):
        t = tables.times[k]
        for h in actions_between(fsts, s, tables.V[c], tables.P[c]):
            s = fsts.successor(s, h)
            steps.append(PlanStep(float(t), h.name, h.target))
        s = fsts.successor(s, TIME_PASSING)
    plan_ = Plan(steps)
    rep = simulate_plan(plan_, fsts, strict=True)
    plan_.states = rep.states
    plan_.metrics = rep.metrics
    return plan_

