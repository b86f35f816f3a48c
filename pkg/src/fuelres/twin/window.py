"""Measurement windows, noisy sensing and horizon simulation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .solver import FuelTwin, SingularNetwork, get_twin
from .topology import INPUT_NAMES, OUTPUT_NAMES
from .vectors import N_INPUTS, N_OUTPUTS, FaultVector, InputVector, NoiseModel, OutputVector

CSV_HEADER = ("t", *INPUT_NAMES, *OUTPUT_NAMES)


@dataclass(frozen=True)
class MeasurementWindow:
    """Timestamped applied inputs and (noisy) outputs.

    Attributes
    ----------
    t : ndarray (n,)
        Strictly increasing sample times in seconds.
    u : ndarray (n, 13)
    y : ndarray (n, 14)
        Measured outputs.
    y_true : ndarray (n, 14) or None
        Noiseless outputs, kept for test oracles; never used by estimators.
    """

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_true: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, float).reshape(-1)
        u = np.asarray(self.u, float).reshape(-1, N_INPUTS)
        y = np.asarray(self.y, float).reshape(-1, N_OUTPUTS)
        if t.size == 0:
            raise ValueError("window must be non-empty")
        if not (u.shape[0] == y.shape[0] == t.size):
            raise ValueError("t, u and y lengths differ")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        if self.y_true is not None:
            object.__setattr__(self, "y_true", np.asarray(self.y_true, float).reshape(-1, N_OUTPUTS))

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, sl) -> "MeasurementWindow":
        if isinstance(sl, int):
            sl = slice(sl, sl + 1 if sl != -1 else None)
        yt = None if self.y_true is None else self.y_true[sl]
        return MeasurementWindow(self.t[sl], self.u[sl], self.y[sl], yt)

    def concat(self, other: "MeasurementWindow") -> "MeasurementWindow":
        yt = None
        if self.y_true is not None and other.y_true is not None:
            yt = np.vstack([self.y_true, other.y_true])
        return MeasurementWindow(
            np.r_[self.t, other.t], np.vstack([self.u, other.u]), np.vstack([self.y, other.y]), yt
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for row in np.column_stack([self.t, self.u, self.y]):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "MeasurementWindow":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header")
        data = np.array(rows[1:], dtype=float).reshape(-1, len(CSV_HEADER))
        return cls(data[:, 0], data[:, 1 : 1 + N_INPUTS], data[:, 1 + N_INPUTS :])


def sense(y, noise: NoiseModel, rng: np.random.Generator | None = None):
    """Add Gaussian sensor noise.

    With ``rng=None`` a fresh stream is drawn from ``noise.seed``, so repeated
    calls return the same perturbation. Pass a generator to continue a stream.
    """
    arr = y.values if isinstance(y, OutputVector) else np.asarray(y, float)
    rng = noise.rng() if rng is None else rng
    out = arr + rng.standard_normal(arr.shape) * noise.sigma
    return OutputVector(out) if isinstance(y, OutputVector) else out


def simulate_horizon(
    topology,
    u_seq: Sequence | np.ndarray,
    p_traj: Sequence | np.ndarray,
    noise: NoiseModel | None = None,
    t0: float = 0.0,
    dt: float = 1.0,
    rng: np.random.Generator | None = None,
) -> MeasurementWindow:
    """Solve and sense a sequence of operating points.

    ``topology`` may be a :class:`NetworkTopology`, a compiled
    :class:`FuelTwin` or None for the bundled system.

    Raises
    ------
    SingularNetwork
        With ``rows`` listing the failing sample indices.
    """
    twin = topology if isinstance(topology, FuelTwin) else get_twin(topology)
    U = np.array([x.values if isinstance(x, InputVector) else x for x in u_seq], float)
    P = np.array([x.values if isinstance(x, FaultVector) else x for x in p_traj], float)
    if U.ndim != 2 or U.shape[0] != P.shape[0] or U.shape[0] < 1:
        raise ValueError("u_seq and p_traj must have the same non-zero length")
    try:
        y_true = twin.solve(U, P)
    except SingularNetwork as exc:
        raise SingularNetwork(f"sample(s) {exc.rows}: {exc}", rows=exc.rows) from exc
    noise = NoiseModel.zero() if noise is None else noise
    y = sense(y_true, noise, rng)
    t = t0 + dt * np.arange(U.shape[0])
    return MeasurementWindow(t, U, y, y_true)
