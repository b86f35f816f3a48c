"""Single-fault parameter estimation against a simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from ..twin.solver import FuelTwin, SingularNetwork
from ..twin.topology import FAULT_NAMES, OUTPUT_NAMES
from ..twin.vectors import nominal_fault_array, nominal_fault_value
from ..twin.window import MeasurementWindow

FLOW_OUTPUTS = tuple(range(8))


class EstimationFailed(RuntimeError):
    def __init__(self, fault_index: int, message: str = "every twin evaluation failed"):
        super().__init__(f"fault {fault_index}: {message}")
        self.fault_index = fault_index


@dataclass(frozen=True)
class FaultHypothesis:
    """Search box and detection threshold for one fault parameter (1-based)."""

    fault_index: int
    lo: float = 0.0
    hi: float = 1.0
    eps: float = 0.05

    def __post_init__(self):
        if not 1 <= self.fault_index <= len(FAULT_NAMES):
            raise ValueError(f"fault index {self.fault_index} outside 1..{len(FAULT_NAMES)}")
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError("need 0 <= lo < hi <= 1")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def name(self) -> str:
        return FAULT_NAMES[self.fault_index - 1]


def leak_hypotheses(eps: float = 0.05, faults=range(1, 9)) -> list[FaultHypothesis]:
    return [FaultHypothesis(i, eps=eps) for i in faults]


@dataclass
class SampleTrace:
    """Every parameter value tried for one hypothesis with its residuals.

    ``sse[m, j]`` is the sum over the window of squared residuals of output
    ``j`` at parameter ``p[m]``; rows of failed twin calls hold ``inf``.
    """

    p: np.ndarray = field(default_factory=lambda: np.empty(0))
    sse: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def loss(self) -> np.ndarray:
        return self.sse.sum(axis=1)

    def extend(self, p, sse) -> None:
        p = np.atleast_1d(np.asarray(p, float))
        sse = np.atleast_2d(np.asarray(sse, float))
        self.p = np.r_[self.p, p]
        self.sse = sse if self.sse.size == 0 else np.vstack([self.sse, sse])


class BoundSimulator:
    """A twin bound to the inputs of one window.

    ``evaluate`` maps a batch of fault vectors (G, 19) to predictions of the
    selected outputs, shape (G, n_samples, n_out).
    """

    def __init__(self, twin: FuelTwin, window: MeasurementWindow, outputs=FLOW_OUTPUTS):
        self.twin = twin
        self.u = window.u
        cols = [twin.output_names.index(OUTPUT_NAMES[j]) for j in outputs]
        self.cols = np.asarray(cols)
        self.output_idx = np.asarray(outputs)
        self.y = window.y[:, self.output_idx]
        self.n_evals = 0

    def evaluate(self, P: np.ndarray) -> np.ndarray:
        G, n = P.shape[0], self.u.shape[0]
        U = np.tile(self.u, (G, 1))
        PP = np.repeat(P, n, axis=0)
        self.n_evals += G
        return self.twin.solve(U, PP)[:, self.cols].reshape(G, n, -1)


def bind(twin, window: MeasurementWindow, outputs=FLOW_OUTPUTS):
    if hasattr(twin, "bind"):
        return twin.bind(window, outputs)
    return BoundSimulator(twin, window, outputs)


def _sse_batch(sim, hyp_idx: int, values: np.ndarray, base: np.ndarray) -> np.ndarray:
    P = np.tile(base, (values.size, 1))
    P[:, hyp_idx - 1] = values
    try:
        pred = sim.evaluate(P)
        return ((pred - sim.y[None]) ** 2).sum(axis=1)
    except SingularNetwork:
        if values.size == 1:
            return np.full((1, sim.y.shape[1]), np.inf)
        return np.vstack([_sse_batch(sim, hyp_idx, values[i : i + 1], base) for i in range(values.size)])


def estimate_single_fault(
    window: MeasurementWindow,
    hyp: FaultHypothesis,
    twin,
    outputs=FLOW_OUTPUTS,
    n_grid: int = 21,
    xatol: float = 1e-6,
    maxiter: int = 100,
):
    """Bounded least-squares fit of one fault parameter.

    A uniform grid over ``[lo, hi]`` is evaluated first (one batched twin
    call); a bounded Brent search then refines inside the bracket around the
    best grid point. Every evaluation is recorded in the sample trace.

    Returns
    -------
    p_hat : float
    loss : float
        Sum over the window of squared output residuals at ``p_hat``.
    trace : SampleTrace
    """
    sim = bind(twin, window, outputs)
    base = nominal_fault_array()
    trace = SampleTrace()
    grid = np.linspace(hyp.lo, hyp.hi, n_grid)
    trace.extend(grid, _sse_batch(sim, hyp.fault_index, grid, base))

    loss = trace.loss
    if not np.isfinite(loss).any():
        raise EstimationFailed(hyp.fault_index)
    k = int(np.nanargmin(loss))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_grid - 1)]

    def f(x):
        sse = _sse_batch(sim, hyp.fault_index, np.array([x]), base)
        trace.extend(x, sse)
        val = float(sse.sum())
        return val if math.isfinite(val) else 1e300

    minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": xatol, "maxiter": maxiter})
    loss = trace.loss
    m = int(np.argmin(loss))
    return float(trace.p[m]), float(loss[m]), trace


def nominal_value(hyp: FaultHypothesis, window: MeasurementWindow) -> float:
    return nominal_fault_value(hyp.fault_index, window.u)
