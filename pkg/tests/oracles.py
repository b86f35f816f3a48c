"""Independent reference computations used by the tests.

Nothing here calls the search or the scoring code under test; the oracles
only use the twin (through ``FSTS.attachment``) and plain arithmetic.
"""

import csv
import itertools
import math

import numpy as np

from fuelres.planner import AttachmentFailure


def mini_oracle(fsts):
    """Best resilience over every sequence of configurations, one per step.

    Any configuration can be reached from any other by one batch of toggles
    on a two-level pump grid, so enumerating configuration sequences covers
    every action subset at every decision point.
    """
    pr = fsts.problem
    nv, npm = len(fsts.valve_names), len(fsts.pump_names)
    cfgs = [(v, p) for v in itertools.product((0, 1), repeat=nv)
            for p in itertools.product(range(len(fsts.levels)), repeat=npm)]
    lo, hi = pr.engine_band
    yd = np.asarray(pr.reference_flow)
    steps = []
    for k in range(pr.n_steps):
        p = pr.fault_at(pr.t_start + (k + 1) * pr.dt)
        rows = []
        for v, pm in cfgs:
            try:
                d, e = fsts.attachment(v, pm, p)
            except AttachmentFailure:
                rows.append(None)
                continue
            if not ((e >= lo * yd) & (e <= hi * yd)).all():
                rows.append(None)
                continue
            rows.append((d * pr.dt, np.abs(yd - e).sum() * pr.dt, np.abs(e - d).sum() * pr.dt))
        steps.append(rows)
    best, arg = -math.inf, None
    cap = np.asarray(pr.tank_capacity)
    for seq in itertools.product(range(len(cfgs)), repeat=pr.n_steps):
        rows = [steps[k][c] for k, c in enumerate(seq)]
        if any(r is None for r in rows):
            continue
        if (sum(r[0] for r in rows) > cap + 1e-6).any():
            continue
        dev = math.fsum(r[1] for r in rows)
        imb = math.fsum(r[2] for r in rows)
        R = 1 - pr.alpha[0] * dev / ((pr.horizon + 1) * yd.sum()) - pr.alpha[1] * imb / sum(pr.metric_beta)
        if R > best:
            best, arg = R, [cfgs[c] for c in seq]
    return best, arg


def resilience_from_trace_csv(path, y_ref=(1.0, 1.0), beta=(3600.0, 3600.0), alpha=(0.5, 0.5)):
    """Recompute J1, J2 and R from an exported flow trace with the csv module."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = len(rows)
    dev = math.fsum(abs(y_ref[i] - float(r[f"y_out_{i + 1}"])) for r in rows for i in range(2))
    imb = math.fsum(abs(float(r[f"y_out_{i + 1}"]) - float(r[f"y_in_{i + 1}"])) for r in rows for i in range(2))
    j1 = dev / (n * sum(y_ref))
    j2 = imb / sum(beta)
    return j1, j2, 1 - alpha[0] * j1 - alpha[1] * j2
