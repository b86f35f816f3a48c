"""Concurrent single-fault diagnosis and the diagnosis report."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..twin.solver import FuelTwin, get_twin
from ..twin.topology import FAULT_NAMES, OUTPUT_NAMES
from ..twin.vectors import N_INPUTS, N_OUTPUTS, NoiseModel
from ..twin.window import MeasurementWindow
from .estimate import (
    FLOW_OUTPUTS,
    EstimationFailed,
    FaultHypothesis,
    SampleTrace,
    estimate_single_fault,
    leak_hypotheses,
    nominal_value,
)
from .probability import entropy, fault_probabilities


@dataclass
class Diagnosis:
    """Outcome of one diagnosis run; keys are 1-based fault indices."""

    estimates: dict[int, float]
    losses: dict[int, float]
    q: dict[int, float]
    q_bar: dict[int, float]
    nominal: dict[int, float]
    eps: dict[int, float]
    bounds: dict[int, tuple[float, float]]
    ambiguous: list[int]
    entropy: float
    wall_time: float
    traces: dict[int, SampleTrace] = field(default_factory=dict, repr=False)
    failed: dict[int, str] = field(default_factory=dict)
    ambiguity_unresolved: bool = False

    @property
    def faults(self) -> list[int]:
        return sorted(self.q)

    @property
    def detected(self) -> list[int]:
        return [i for i in self.faults if abs(self.estimates[i] - self.nominal[i]) > self.eps[i]]

    @property
    def argmax(self) -> int:
        return max(self.faults, key=lambda i: (self.q[i], -self.losses[i]))

    @property
    def best(self) -> int | None:
        """Most probable detected fault, or None when the window looks nominal."""
        det = self.detected
        return max(det, key=lambda i: (self.q[i], -self.losses[i])) if det else None

    def saturated(self, i: int) -> bool:
        lo, hi = self.bounds[i]
        return bool(np.isclose(self.estimates[i], lo, atol=1e-4) or np.isclose(self.estimates[i], hi, atol=1e-4))

    def rows(self) -> list[dict]:
        return [
            {
                "fault": i,
                "name": FAULT_NAMES[i - 1],
                "estimate": self.estimates[i],
                "loss": self.losses[i],
                "probability": self.q[i],
                "raw_probability": self.q_bar[i],
                "detected": i in self.detected,
                "ambiguous": i in self.ambiguous,
                "at_bound": self.saturated(i),
            }
            for i in self.faults
        ]

    def to_dict(self) -> dict:
        return {
            "faults": self.rows(),
            "ambiguous": list(self.ambiguous),
            "entropy": self.entropy,
            "wall_time": self.wall_time,
            "failed": {str(k): v for k, v in self.failed.items()},
            "ambiguity_unresolved": self.ambiguity_unresolved,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_csv(self, path) -> None:
        import csv

        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def ambiguity_set(q: dict, detected: Sequence[int], theta: float = 0.5) -> list[int]:
    """Detected faults whose probability is within ``theta`` of the best one."""
    det = [i for i in detected if i in q]
    if not det:
        return []
    top = max(q[i] for i in det)
    return sorted(i for i in det if q[i] >= theta * top)


def diagnose(
    window: MeasurementWindow,
    hypotheses: Sequence[FaultHypothesis] | None = None,
    twin: FuelTwin | None = None,
    worker_budget: int = 4,
    noise: NoiseModel | np.ndarray | None = None,
    theta_amb: float = 0.5,
    outputs=FLOW_OUTPUTS,
    weighting: str = "evidence",
) -> Diagnosis:
    """Estimate every hypothesis concurrently and rank them.

    Parameters
    ----------
    window : MeasurementWindow
    hypotheses : sequence of FaultHypothesis, optional
        Defaults to the eight leak faults with ``eps = 0.05``.
    twin : FuelTwin or subsystem model
    worker_budget : int
        Upper bound on concurrent estimations.
    noise : NoiseModel or array of 14 sigmas
        Used for the likelihoods; defaults to the standard sensor noise.
    theta_amb : float
        Ambiguity threshold relative to the top probability.
    outputs : sequence of int
        Output columns compared (default: the eight mass flows).
    """
    hyps = list(leak_hypotheses() if hypotheses is None else hypotheses)
    if not hyps:
        raise ValueError("at least one hypothesis is required")
    twin = get_twin() if twin is None else twin
    sig = noise.sigma if isinstance(noise, NoiseModel) else noise
    sig = NoiseModel.default().sigma if sig is None else np.asarray(sig, float)
    sig = sig[np.asarray(outputs)]

    t0 = time.perf_counter()

    def run(h):
        try:
            return h, estimate_single_fault(window, h, twin, outputs=outputs), None
        except EstimationFailed as exc:
            return h, None, str(exc)

    workers = max(1, min(int(worker_budget), len(hyps)))
    if workers == 1:
        results = [run(h) for h in hyps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, hyps))

    est, loss, traces, failed = {}, {}, {}, {}
    nominal, eps, bounds = {}, {}, {}
    for h, res, err in sorted(results, key=lambda r: r[0].fault_index):
        i = h.fault_index
        if res is None:
            failed[i] = err
            continue
        est[i], loss[i], traces[i] = res
        nominal[i] = nominal_value(h, window)
        eps[i] = h.eps
        bounds[i] = (h.lo, h.hi)
    if not traces:
        raise EstimationFailed(hyps[0].fault_index, f"all hypotheses failed: {failed}")
    q, q_bar = fault_probabilities(traces, sig, eps, nominal, weighting=weighting)
    diag = Diagnosis(est, loss, q, q_bar, nominal, eps, bounds, [], 0.0, 0.0, traces, failed)
    diag.ambiguous = ambiguity_set(q, diag.detected, theta_amb)
    diag.entropy = entropy([q[i] for i in diag.ambiguous])
    diag.wall_time = time.perf_counter() - t0
    return diag


def _window_from_array(X) -> MeasurementWindow:
    X = check_array(X, ensure_min_samples=1)
    if X.shape[1] != 1 + N_INPUTS + N_OUTPUTS:
        raise ValueError(f"expected {1 + N_INPUTS + N_OUTPUTS} columns (t, inputs, outputs)")
    return MeasurementWindow(X[:, 0], X[:, 1 : 1 + N_INPUTS], X[:, 1 + N_INPUTS :])


class Diagnoser(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`diagnose`.

    ``fit`` takes fault-free measurements laid out like the window CSV
    (``t``, 13 inputs, 14 outputs per row) and estimates the per-output noise
    level from their residual against the twin. ``predict`` labels each
    window with its most probable detected fault (0 when nominal).

    Parameters
    ----------
    faults : sequence of int, optional
        Hypothesis indices; the eight leaks by default.
    eps : float
    theta_amb : float
    worker_budget : int
    use_pressures : bool
        Also compare pressure sensors (off by default).
    sigma_floor : float
        Lower bound on fitted sigmas relative to the default noise model.
    """

    def __init__(self, faults=None, eps=0.05, theta_amb=0.5, worker_budget=4,
                 use_pressures=False, sigma_floor=1e-3):
        self.faults = faults
        self.eps = eps
        self.theta_amb = theta_amb
        self.worker_budget = worker_budget
        self.use_pressures = use_pressures
        self.sigma_floor = sigma_floor

    def _outputs(self):
        return tuple(range(N_OUTPUTS)) if self.use_pressures else FLOW_OUTPUTS

    def fit(self, X, y=None):
        w = _window_from_array(X)
        twin = get_twin()
        pred = twin.solve(w.u, np.tile(_nominal_faults(), (len(w), 1)))
        resid = w.y - pred
        default = NoiseModel.default().sigma
        if len(w) > 1:
            sig = resid.std(axis=0, ddof=1)
        else:
            sig = default.copy()
        self.sigma_ = np.maximum(sig, self.sigma_floor * default)
        self.classes_ = np.array([0] + list(self._faults()))
        self.n_features_in_ = X.shape[1] if hasattr(X, "shape") else len(X[0])
        return self

    def _faults(self):
        return list(range(1, 9)) if self.faults is None else list(self.faults)

    def diagnose(self, window: MeasurementWindow) -> Diagnosis:
        check_is_fitted(self, "sigma_")
        hyps = [FaultHypothesis(i, eps=self.eps) for i in self._faults()]
        return diagnose(window, hyps, worker_budget=self.worker_budget,
                        noise=self.sigma_, theta_amb=self.theta_amb, outputs=self._outputs())

    def _as_windows(self, X):
        if isinstance(X, MeasurementWindow):
            return [X]
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], MeasurementWindow):
            return list(X)
        arr = np.asarray(X)
        if arr.ndim == 3:
            return [_window_from_array(a) for a in arr]
        return [_window_from_array(arr)]

    def predict(self, X) -> np.ndarray:
        out = []
        for w in self._as_windows(X):
            best = self.diagnose(w).best
            out.append(0 if best is None else best)
        return np.array(out)

    def predict_proba(self, X) -> np.ndarray:
        rows = []
        for w in self._as_windows(X):
            d = self.diagnose(w)
            rows.append([d.q.get(i, 0.0) for i in self._faults()])
        return np.array(rows)


def _nominal_faults():
    from ..twin.vectors import nominal_fault_array

    return nominal_fault_array()


def confusion_matrix(
    magnitude: float,
    faults: Sequence[int] = tuple(range(1, 9)),
    noise: NoiseModel | None = None,
    n_samples: int = 10,
    twin: FuelTwin | None = None,
    worker_budget: int = 4,
) -> tuple[np.ndarray, np.ndarray, list[Diagnosis]]:
    """Probability and estimate matrices: row = injected fault, column = hypothesis."""
    from ..twin.vectors import FaultVector, InputVector
    from ..twin.window import simulate_horizon

    twin = get_twin() if twin is None else twin
    noise = NoiseModel.default() if noise is None else noise
    rng = noise.rng()
    u = InputVector.nominal()
    Q = np.zeros((len(faults), len(faults)))
    E = np.zeros_like(Q)
    diags = []
    for r, f in enumerate(faults):
        p = FaultVector.single(f, magnitude)
        w = simulate_horizon(twin, [u] * n_samples, [p] * n_samples, noise, rng=rng)
        d = diagnose(w, leak_hypotheses(faults=faults), twin, worker_budget, noise)
        diags.append(d)
        Q[r] = [d.q[c] for c in faults]
        E[r] = [d.estimates[c] for c in faults]
    return Q, E, diags
