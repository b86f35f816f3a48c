"""Fixed-order input, fault and output vectors plus the sensor noise model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import FAULT_NAMES, INPUT_NAMES, LEAK_FAULTS, OUTPUT_NAMES, STUCK_FAULTS

N_INPUTS = len(INPUT_NAMES)
N_FAULTS = len(FAULT_NAMES)
N_OUTPUTS = len(OUTPUT_NAMES)
N_FLOWS = 8

U_LOWER = np.array([-5.0, -5.0] + [0.0] * 11)
U_UPPER = np.array([5.0, 5.0] + [1.0] * 11)

# Nominal operating point: cross valves 8, 15, 16 closed, everything else open.
NOMINAL_REFERENCE = 3.035
CROSS_VALVES = (8, 15, 16)


def _indexed(names, values, default, label):
    arr = np.full(len(names), default, dtype=float)
    pos = {n: i for i, n in enumerate(names)}
    for k, v in values.items():
        if k not in pos:
            raise KeyError(f"unknown {label} {k!r}")
        arr[pos[k]] = v
    return arr


@dataclass(frozen=True)
class InputVector:
    """Thirteen control inputs: two pump references then valves 6 to 16."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape != (N_INPUTS,):
            raise ValueError(f"expected {N_INPUTS} inputs, got {v.shape[0]}")
        if np.any(v < U_LOWER - 1e-12) or np.any(v > U_UPPER + 1e-12):
            raise ValueError("input outside [-5,5]^2 x [0,1]^11")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dict(cls, d: dict) -> "InputVector":
        return cls(_indexed(INPUT_NAMES, d, 0.0, "input"))

    @classmethod
    def nominal(cls, reference: float = NOMINAL_REFERENCE) -> "InputVector":
        d = {f"control_valve_{v}": (0.0 if v in CROSS_VALVES else 1.0) for v in range(6, 17)}
        d["reference_1"] = d["reference_2"] = reference
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dict(zip(INPUT_NAMES, self.values.tolist()))

    def __getitem__(self, name: str) -> float:
        return float(self.values[INPUT_NAMES.index(name)])


@dataclass(frozen=True)
class FaultVector:
    """Eight leak severities then eleven stuck-valve positions.

    An inactive stuck fault is stored as NaN; an active one pins the valve
    opening to the stored value.
    """

    values: np.ndarray = field(default_factory=lambda: nominal_fault_array())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape != (N_FAULTS,):
            raise ValueError(f"expected {N_FAULTS} fault parameters, got {v.shape[0]}")
        leaks, stuck = v[:8], v[8:]
        if np.any(np.isnan(leaks)) or np.any((leaks < 0) | (leaks > 1)):
            raise ValueError("leak parameters must lie in [0, 1]")
        active = stuck[~np.isnan(stuck)]
        if np.any((active < 0) | (active > 1)):
            raise ValueError("stuck positions must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @classmethod
    def nominal(cls) -> "FaultVector":
        return cls(nominal_fault_array())

    @classmethod
    def from_dict(cls, d: dict) -> "FaultVector":
        arr = nominal_fault_array()
        pos = {n: i for i, n in enumerate(FAULT_NAMES)}
        for k, v in d.items():
            if k not in pos:
                raise KeyError(f"unknown fault {k!r}")
            arr[pos[k]] = np.nan if v is None else v
        return cls(arr)

    @classmethod
    def single(cls, index: int, value: float) -> "FaultVector":
        """Nominal vector with fault ``index`` (1-based) set to ``value``."""
        arr = nominal_fault_array()
        arr[index - 1] = value
        return cls(arr)

    def to_dict(self) -> dict:
        return {
            n: (None if np.isnan(x) else float(x))
            for n, x in zip(FAULT_NAMES, self.values)
        }

    def active(self) -> list[str]:
        out = [n for n, x in zip(LEAK_FAULTS, self.values[:8]) if x > 0]
        out += [n for n, x in zip(STUCK_FAULTS, self.values[8:]) if not np.isnan(x)]
        return out


def nominal_fault_array() -> np.ndarray:
    arr = np.zeros(N_FAULTS)
    arr[8:] = np.nan
    return arr


def nominal_fault_value(index: int, u: np.ndarray | None = None) -> float:
    """Nominal value of fault ``index`` (1-based).

    Leaks are nominally zero. A stuck valve has no fault-free value of its own,
    so the commanded opening stands in for it.
    """
    if index <= 8:
        return 0.0
    if u is None:
        return float("nan")
    return float(np.asarray(u)[..., index - 9 + 2].mean())


@dataclass(frozen=True)
class OutputVector:
    """Eight mass flows (kg/s) followed by pressures 3 to 8 (Pa)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape != (N_OUTPUTS,):
            raise ValueError(f"expected {N_OUTPUTS} outputs, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("outputs must be finite")
        object.__setattr__(self, "values", v)

    @property
    def flows(self) -> np.ndarray:
        return self.values[:N_FLOWS]

    @property
    def pressures(self) -> np.ndarray:
        return self.values[N_FLOWS:]

    def to_dict(self) -> dict:
        return dict(zip(OUTPUT_NAMES, self.values.tolist()))

    def __getitem__(self, name: str) -> float:
        return float(self.values[OUTPUT_NAMES.index(name)])


@dataclass(frozen=True)
class NoiseModel:
    """Independent Gaussian sensor noise with a seeded stream.

    Parameters
    ----------
    sigma : array of shape (14,)
        Per-output standard deviations.
    seed : int
        Seed of the deterministic stream used by :func:`sense`.
    """

    sigma: np.ndarray
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float).reshape(-1)
        if s.shape != (N_OUTPUTS,):
            raise ValueError(f"sigma must have {N_OUTPUTS} entries")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("sigma must be finite and non-negative")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def default(cls, seed: int = 0, flow: float = 0.01, pressure: float = 100.0) -> "NoiseModel":
        return cls(np.r_[np.full(N_FLOWS, flow), np.full(N_OUTPUTS - N_FLOWS, pressure)], seed)

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(np.zeros(N_OUTPUTS))

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.sigma**2)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)
