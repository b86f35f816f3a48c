"""Twin-generated training data for the surrogate."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..twin.solver import FuelTwin, SingularNetwork, get_twin
from ..twin.vectors import N_FLOWS, N_INPUTS, U_LOWER, U_UPPER, nominal_fault_array

log = logging.getLogger(__name__)

N_LEAKS = 8
N_FEATURES = N_INPUTS + N_LEAKS


@dataclass(frozen=True)
class TrainingSet:
    """Rows of controls ``u``, leak parameters ``p`` and twin mass flows ``y``."""

    u: np.ndarray  # (n, 13)
    p: np.ndarray  # (n, 8)
    y: np.ndarray  # (n, 8)
    seed: int
    single_fault: bool = True

    def __post_init__(self):
        n = self.u.shape[0]
        if self.p.shape != (n, N_LEAKS) or self.y.shape != (n, N_FLOWS):
            raise ValueError("inconsistent training set shapes")
        if np.any(self.u < U_LOWER) or np.any(self.u > U_UPPER):
            raise ValueError("training inputs outside the control bounds")

    def __len__(self) -> int:
        return self.u.shape[0]

    @property
    def X(self) -> np.ndarray:
        return np.hstack([self.u, self.p])

    def split(self, n_first: int) -> tuple["TrainingSet", "TrainingSet"]:
        a = TrainingSet(self.u[:n_first], self.p[:n_first], self.y[:n_first], self.seed, self.single_fault)
        b = TrainingSet(self.u[n_first:], self.p[n_first:], self.y[n_first:], self.seed, self.single_fault)
        return a, b

    def save(self, path) -> None:
        np.savez_compressed(path, u=self.u, p=self.p, y=self.y, seed=self.seed, single_fault=self.single_fault)

    @classmethod
    def load(cls, path) -> "TrainingSet":
        z = np.load(path)
        return cls(z["u"], z["p"], z["y"], int(z["seed"]), bool(z["single_fault"]))


def features(u, p) -> np.ndarray:
    """Surrogate input rows: 13 controls followed by the 8 leak parameters."""
    u = np.atleast_2d(np.asarray(u, float))
    p = np.atleast_2d(np.asarray(p, float))
    if p.shape[1] > N_LEAKS:
        p = p[:, :N_LEAKS]
    n = max(u.shape[0], p.shape[0])
    return np.hstack([np.broadcast_to(u, (n, u.shape[1])), np.broadcast_to(p, (n, p.shape[1]))])


def _draw(rng: np.random.Generator, n: int, single_fault: bool):
    u = U_LOWER + (U_UPPER - U_LOWER) * rng.random((n, N_INPUTS))
    if single_fault:
        p = np.zeros((n, N_LEAKS))
        which = rng.integers(0, N_LEAKS, n)
        p[np.arange(n), which] = rng.random(n)
    else:
        p = rng.random((n, N_LEAKS))
    return u, p


def _solve_rows(twin: FuelTwin, u: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Twin flows and a mask of rows that solved."""
    full = np.tile(nominal_fault_array(), (u.shape[0], 1))
    full[:, :N_LEAKS] = p
    try:
        return twin.solve(u, full)[:, :N_FLOWS], np.ones(u.shape[0], bool)
    except SingularNetwork as exc:
        bad = np.zeros(u.shape[0], bool)
        if exc.rows is not None:
            bad[np.asarray(exc.rows)] = True
        else:
            bad[:] = True
        y = np.full((u.shape[0], N_FLOWS), np.nan)
        if (~bad).any():
            y[~bad] = twin.solve(u[~bad], full[~bad])[:, :N_FLOWS]
        return y, ~bad


def generate_training_data(
    twin: FuelTwin | None = None,
    n: int = 50_000,
    seed: int = 0,
    single_fault: bool = True,
    chunk: int = 5_000,
    workers: int = 1,
) -> TrainingSet:
    """Sample controls uniformly over their bounds and leaks over ``[0, 1]``.

    With ``single_fault`` (default) each row carries one leak drawn uniformly
    in ``[0, 1]`` on a uniformly chosen leak and the others at zero, matching
    the single-fault hypotheses the surrogate is queried with. Singular draws
    are logged and replaced by fresh ones from the same stream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    twin = get_twin() if twin is None else twin
    rng = np.random.default_rng(seed)
    us, ps, ys = [], [], []
    have = 0
    while have < n:
        m = n - have
        sizes = [min(chunk, m - s) for s in range(0, m, chunk)]
        draws = [_draw(rng, k, single_fault) for k in sizes]
        if workers > 1 and len(draws) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                solved = list(pool.map(lambda d: _solve_rows(twin, *d), draws))
        else:
            solved = [_solve_rows(twin, *d) for d in draws]
        for (u, p), (y, ok) in zip(draws, solved):
            if not ok.all():
                log.warning("skipped %d singular draws", int((~ok).sum()))
            us.append(u[ok])
            ps.append(p[ok])
            ys.append(y[ok])
            have += int(ok.sum())
    u, p, y = (np.vstack(a)[:n] for a in (us, ps, ys))
    return TrainingSet(u, p, y, seed, single_fault)
