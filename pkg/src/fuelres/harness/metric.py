"""Resilience metric over a sampled execution trace."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


class GridMismatch(ValueError):
    """The trace does not cover ``[0, T]`` at one-second spacing."""


@dataclass(frozen=True)
class ResilienceParams:
    y_ref: tuple[float, float] = (1.0, 1.0)  # kg/s
    horizon: float = 1800.0  # s
    beta: tuple[float, float] = (3600.0, 3600.0)  # kg
    alpha: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if min(self.alpha) < 0 or abs(sum(self.alpha) - 1.0) > 1e-12:
            raise ValueError("alpha weights must be non-negative and sum to one")
        if self.horizon <= 0 or min(self.beta) <= 0:
            raise ValueError("horizon and beta must be positive")


@dataclass
class ExecutionTrace:
    """Tank-side and engine-side mass flows on a uniform grid.

    ``y_in[k, i]`` is the flow drawn from tank ``i`` and ``y_out[k, i]`` the
    flow delivered to engine ``i`` at time ``t[k]``.
    """

    t: np.ndarray
    y_in: np.ndarray
    y_out: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, float).reshape(-1)
        self.y_in = np.asarray(self.y_in, float).reshape(len(self.t), -1)
        self.y_out = np.asarray(self.y_out, float).reshape(len(self.t), -1)
        if not (np.isfinite(self.y_in).all() and np.isfinite(self.y_out).all()):
            raise ValueError("trace values must be finite")
        if len(self.t) > 1:
            d = np.diff(self.t)
            if not np.allclose(d, d[0], rtol=0, atol=1e-9) or d[0] <= 0:
                raise GridMismatch("trace sampling is not uniform")

    HEADER = ("t", "y_in_1", "y_in_2", "y_out_1", "y_out_2")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for row in np.column_stack([self.t, self.y_in, self.y_out]):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "ExecutionTrace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != cls.HEADER:
            raise ValueError(f"{path}: unexpected header {rows[0]}")
        a = np.array(rows[1:], float)
        return cls(a[:, 0], a[:, 1:3], a[:, 3:5])

    def cumulative(self) -> dict[str, np.ndarray]:
        """Fuel spent and delivered (kg) up to each sample, rectangle rule."""
        return {
            "spent": np.cumsum(self.y_in.sum(1)),
            "delivered": np.cumsum(self.y_out.sum(1)),
        }


def resilience(trace: ExecutionTrace, params: ResilienceParams = ResilienceParams()) -> dict:
    """Return ``{"J1", "J2", "R"}`` for a trace sampled at k = 0..T (1 s)."""
    T = params.horizon
    n = int(round(T)) + 1
    if abs(T - round(T)) > 1e-9 or len(trace.t) != n or not np.allclose(trace.t, np.arange(n), rtol=0, atol=1e-9):
        raise GridMismatch(f"expected samples at t = 0, 1, ..., {T:g}; got {len(trace.t)} samples")
    yd = np.asarray(params.y_ref, float)
    j1 = float(np.abs(yd - trace.y_out).sum() / ((T + 1) * yd.sum()))
    j2 = float(np.abs(trace.y_out - trace.y_in).sum() / sum(params.beta))
    r = 1.0 - params.alpha[0] * j1 - params.alpha[1] * j2
    return {"J1": j1, "J2": j2, "R": r}


def params_dict(params: ResilienceParams) -> dict:
    return asdict(params)


def write_timeseries(trace: ExecutionTrace, path: str | Path) -> None:
    """Plot-ready cumulative fuel curves next to the raw flows."""
    c = trace.cumulative()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "fuel_spent", "fuel_delivered"])
        for row in zip(trace.t, c["spent"], c["delivered"]):
            w.writerow([repr(float(x)) for x in row])
