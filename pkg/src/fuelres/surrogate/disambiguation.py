"""Input design that pulls ambiguous fault hypotheses apart, and re-diagnosis."""

from __future__ import annotations

import copy
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..diagnosis.engine import Diagnosis, ambiguity_set, diagnose
from ..diagnosis.estimate import FaultHypothesis
from ..diagnosis.probability import entropy
from ..twin.solver import FuelTwin, get_twin
from ..twin.vectors import (
    N_FLOWS,
    N_INPUTS,
    U_LOWER,
    U_UPPER,
    FaultVector,
    InputVector,
    NoiseModel,
    nominal_fault_array,
)
from ..twin.window import simulate_horizon
from .data import N_LEAKS, TrainingSet, features
from .mlp import Adam, MLPSurrogate

SPAN = U_UPPER - U_LOWER


class NoImprovement(RuntimeError):
    """Input design could not raise the separation objective."""

    def __init__(self, gain: float, diagnosis: Diagnosis | None = None):
        super().__init__(f"objective gain {gain:.3g} below threshold; hypotheses look indistinguishable")
        self.gain = gain
        self.diagnosis = diagnosis


class OutOfDistribution(UserWarning):
    pass


# -- training / prediction wrappers ------------------------------------------------

def train_surrogate(data: TrainingSet, **config) -> MLPSurrogate:
    """Fit an :class:`MLPSurrogate` on ``data`` (controls + leaks -> mass flows)."""
    if len(data) == 0:
        raise ValueError("empty training set")
    return MLPSurrogate(**config).fit(data.X, data.y)


def training_report(model: MLPSurrogate) -> dict:
    return {
        "dims": model.dims_,
        "epochs": model.epochs,
        "lr": model.lr,
        "batch_size": model.batch_size,
        "train_loss": [float(v) for v in getattr(model, "loss_history_", [])],
        "val_mse": model.val_mse_,
        "val_rmse": [float(v) for v in getattr(model, "val_rmse_raw_", [])],
        "train_time": getattr(model, "train_time_", None),
    }


def write_training_report(model: MLPSurrogate, path) -> None:
    with open(path, "w") as fh:
        json.dump(training_report(model), fh, indent=2)


def surrogate_predict(model: MLPSurrogate, u, p) -> np.ndarray:
    """Predicted mass flows for controls ``u`` and fault parameters ``p``.

    ``p`` may hold all nineteen parameters; only the leaks are used. Emits an
    :class:`OutOfDistribution` warning for inputs well outside the training range.
    """
    if isinstance(u, InputVector):
        u = u.values
    if isinstance(p, FaultVector):
        p = p.values
    X = features(u, p)
    ood = model.out_of_distribution(X)
    if ood.any():
        warnings.warn(f"{int(ood.sum())} rows outside the training range", OutOfDistribution, stacklevel=2)
    return model.predict(X)


# -- design problem ------------------------------------------------------------------

@dataclass
class DisambiguationProblem:
    """Hypotheses to separate and optimizer settings.

    ``estimates`` maps fault index to its estimate; a list of pairs is also
    accepted so that duplicate hypotheses can be expressed.

    ``step`` is the Adam step in normalized control coordinates, where every
    control spans ``[0, 1]``.
    """

    estimates: dict[int, float] | list[tuple[int, float]]
    tau: int = 4
    step: float = 0.01
    iterations: int = 500
    restarts: int = 4
    seed: int = 0
    u_start: np.ndarray | None = None
    min_gain: float = 1e-9
    lower: np.ndarray = field(default_factory=lambda: U_LOWER.copy())
    upper: np.ndarray = field(default_factory=lambda: U_UPPER.copy())

    def __post_init__(self):
        items = self.estimates.items() if isinstance(self.estimates, dict) else self.estimates
        self.pairs = [(int(i), float(v)) for i, v in items]
        if len(self.pairs) < 2:
            raise ValueError("need at least two hypotheses")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        for i, _ in self.pairs:
            if not 1 <= i <= N_LEAKS:
                raise ValueError(f"fault {i} is not a leak; the surrogate covers leaks only")

    @property
    def faults(self) -> list[int]:
        return [i for i, _ in self.pairs]

    def leak_rows(self) -> np.ndarray:
        P = np.zeros((len(self.pairs), N_LEAKS))
        for r, (i, v) in enumerate(self.pairs):
            P[r, i - 1] = v
        return P


def _pair_objective(Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared pairwise differences over hypotheses and its gradient.

    ``Y`` has shape ``(H, T, n_out)``.
    """
    H = Y.shape[0]
    total = Y.sum(axis=0)
    # sum_{i<j} |Yi - Yj|^2 = H * sum_i |Yi|^2 - |sum_i Yi|^2
    J = float(H * (Y * Y).sum() - (total * total).sum())
    dY = 2.0 * (H * Y - total[None])
    return J, dY


class SeparationObjective:
    """Surrogate separation objective over an input sequence ``U`` (T x 13)."""

    def __init__(self, model: MLPSurrogate, problem: DisambiguationProblem):
        self.model = model
        self.P = problem.leak_rows()
        self.n_evals = 0  # objective evaluations
        self.n_rows = 0  # surrogate time-step evaluations (one per hypothesis and step)

    def _X(self, U):
        H, T = self.P.shape[0], U.shape[0]
        return np.hstack([np.tile(U, (H, 1)), np.repeat(self.P, T, axis=0)])

    def value(self, U) -> float:
        U = np.atleast_2d(U)
        self.n_evals += 1
        self.n_rows += U.shape[0] * self.P.shape[0]
        Y = self.model.predict(self._X(U)).reshape(self.P.shape[0], U.shape[0], -1)
        return _pair_objective(Y)[0]

    def value_and_grad(self, U) -> tuple[float, np.ndarray]:
        U = np.atleast_2d(U)
        H, T = self.P.shape[0], U.shape[0]
        self.n_evals += 1
        self.n_rows += H * T
        Yf, vjp = self.model.predict_with_grad_fn(self._X(U))
        J, dY = _pair_objective(Yf.reshape(H, T, -1))
        dX = vjp(dY.reshape(H * T, -1))
        return J, dX[:, :N_INPUTS].reshape(H, T, N_INPUTS).sum(axis=0)


def twin_separation(U, estimates: dict[int, float], twin: FuelTwin | None = None) -> float:
    """The same objective evaluated on the twin's mass flows."""
    twin = get_twin() if twin is None else twin
    U = np.atleast_2d(U)
    Ys = []
    for i, v in estimates.items():
        p = np.tile(nominal_fault_array(), (U.shape[0], 1))
        p[:, i - 1] = v
        Ys.append(twin.solve(U, p)[:, :N_FLOWS])
    return _pair_objective(np.stack(Ys))[0]


@dataclass
class DesignResult:
    inputs: list[InputVector]
    objective: float
    initial_objective: float
    history: list[float]  # best-so-far objective per iteration of the winning restart
    n_evals: int
    n_rows: int

    @property
    def U(self) -> np.ndarray:
        return np.stack([u.values for u in self.inputs])


def _ascend(obj: SeparationObjective, z0: np.ndarray, problem: DisambiguationProblem):
    lo, hi = problem.lower, problem.upper
    span = hi - lo
    z = np.clip(z0, 0.0, 1.0)
    opt = Adam([z.shape], lr=problem.step)
    best_J, best_z = -math.inf, z.copy()
    hist = []
    first = None
    for _ in range(problem.iterations):
        J, g = obj.value_and_grad(lo + span * z)
        if first is None:
            first = J
        if J > best_J:
            best_J, best_z = J, z.copy()
        hist.append(best_J)
        (st,) = opt.steps([g * span])
        z = np.clip(z + st, 0.0, 1.0)
    J = obj.value(lo + span * z)
    if J > best_J:
        best_J, best_z = J, z.copy()
    hist.append(best_J)
    return best_J, best_z, first, hist


def design_disambiguation_inputs(problem: DisambiguationProblem, model: MLPSurrogate) -> DesignResult:
    """Adam ascent on the separation objective with clipping to the control box.

    The first restart starts from ``problem.u_start`` (the nominal inputs by
    default), the others from uniform random points. The best restart wins;
    ties go to the smaller input norm.

    Raises
    ------
    NoImprovement
        If no restart improves its starting objective by ``problem.min_gain``.
    """
    T = problem.tau + 1
    lo, span = problem.lower, problem.upper - problem.lower
    start = InputVector.nominal().values if problem.u_start is None else np.asarray(problem.u_start, float)
    starts = [np.tile((start - lo) / span, (T, 1))]
    rng = np.random.default_rng(problem.seed)
    starts += [rng.random((T, N_INPUTS)) for _ in range(max(problem.restarts, 1) - 1)]
    obj = SeparationObjective(model, problem)
    best = None
    gain = -math.inf
    initial = None
    for z0 in starts:
        J, z, J0, hist = _ascend(obj, z0, problem)
        initial = J0 if initial is None else initial
        gain = max(gain, J - J0)
        U = lo + span * z
        key = (J, -float(np.linalg.norm(U)))
        if best is None or key > best[0]:
            best = (key, U, hist)
    if gain < problem.min_gain:
        raise NoImprovement(gain)
    _, U, hist = best
    U = np.clip(U, problem.lower, problem.upper)
    return DesignResult([InputVector(u) for u in U], best[0][0], initial, hist, obj.n_evals, obj.n_rows)


def powell_baseline(problem: DisambiguationProblem, model: MLPSurrogate, maxiter: int | None = None):
    """Derivative-free reference: Powell on the same objective (bounded).

    Returns ``(objective, n_evals, n_rows)``.
    """
    T = problem.tau + 1
    lo, span = problem.lower, problem.upper - problem.lower
    start = InputVector.nominal().values if problem.u_start is None else np.asarray(problem.u_start, float)
    z0 = np.tile((start - lo) / span, (T, 1)).ravel()
    obj = SeparationObjective(model, problem)

    def f(z):
        return -obj.value(lo + span * np.clip(z.reshape(T, N_INPUTS), 0, 1))

    opts = {"xtol": 1e-4, "ftol": 1e-8}
    if maxiter is not None:
        opts["maxiter"] = maxiter
    res = minimize(f, z0, method="Powell", bounds=[(0, 1)] * z0.size, options=opts)
    return -float(res.fun), obj.n_evals, obj.n_rows


# -- re-diagnosis ----------------------------------------------------------------------

def _restricted_entropy(q: dict, faults) -> float:
    w = np.array([q.get(i, 0.0) for i in faults])
    return entropy(w / w.sum()) if w.sum() > 0 else math.log(len(faults))


def disambiguate(
    diagnosis: Diagnosis,
    truth: FaultVector,
    model: MLPSurrogate,
    twin: FuelTwin | None = None,
    noise: NoiseModel | None = None,
    samples_per_input: int = 2,
    rng: np.random.Generator | None = None,
    **problem_config,
) -> Diagnosis:
    """Design separating inputs, apply them to the plant and re-diagnose.

    ``twin`` plays the plant: it is driven with the designed inputs and the
    true fault ``truth`` to produce a fresh window, which is diagnosed with
    the hypotheses of the ambiguity set only. Faults outside that set keep
    their earlier estimates and get probability zero.

    The returned diagnosis carries ``entropy_before`` / ``entropy_after``
    (entropy of ``q`` restricted to the original ambiguity set) and the
    design result in ``design``.
    """
    amb = list(diagnosis.ambiguous)
    if len(amb) < 2:
        return diagnosis
    twin = get_twin() if twin is None else twin
    noise = NoiseModel.default() if noise is None else noise
    est = {i: diagnosis.estimates[i] for i in amb}
    problem = DisambiguationProblem(est, **problem_config)
    try:
        design = design_disambiguation_inputs(problem, model)
    except NoImprovement as exc:
        flagged = copy.copy(diagnosis)
        flagged.ambiguity_unresolved = True
        exc.diagnosis = flagged
        raise
    u_seq = [u for u in design.inputs for _ in range(samples_per_input)]
    win = simulate_horizon(twin, u_seq, [truth] * len(u_seq), noise, rng=rng)
    hyps = [FaultHypothesis(i, eps=diagnosis.eps[i]) for i in amb]
    fresh = diagnose(win, hyps, twin, worker_budget=len(hyps), noise=noise)

    merged = copy.copy(diagnosis)
    merged.estimates = {**diagnosis.estimates, **fresh.estimates}
    merged.losses = {**diagnosis.losses, **fresh.losses}
    merged.q = {i: fresh.q.get(i, 0.0) for i in diagnosis.q}
    merged.q_bar = {i: fresh.q_bar.get(i, 0.0) for i in diagnosis.q_bar}
    merged.traces = {**diagnosis.traces, **fresh.traces}
    merged.ambiguous = ambiguity_set(fresh.q, fresh.detected)
    merged.entropy = entropy([merged.q[i] for i in merged.ambiguous])
    merged.wall_time = diagnosis.wall_time + fresh.wall_time
    merged.ambiguity_unresolved = len(merged.ambiguous) > 1
    merged.entropy_before = _restricted_entropy(diagnosis.q, amb)
    merged.entropy_after = _restricted_entropy(merged.q, amb)
    merged.design = design
    merged.window = win
    return merged
