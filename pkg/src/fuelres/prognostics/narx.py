"""Polynomial NARX degradation model with forward term selection."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

# Candidate regressors as functions of (p_{k-1}, p_{k-2}).
CANDIDATES = {
    "1": lambda a, b: np.ones_like(a),
    "p[k-1]": lambda a, b: a,
    "p[k-2]": lambda a, b: b,
    "p[k-1]^2": lambda a, b: a * a,
    "p[k-1]*p[k-2]": lambda a, b: a * b,
}
TERM_LAGS = {"1": 0, "p[k-1]": 1, "p[k-2]": 2, "p[k-1]^2": 1, "p[k-1]*p[k-2]": 2}


class InsufficientData(ValueError):
    pass


class RankDeficient(UserWarning):
    """Selected regressors are collinear; coefficients came from a ridge fit."""


def _terms_for(max_lag: int) -> list[str]:
    return [t for t in CANDIDATES if TERM_LAGS[t] <= max_lag]


def _design(series: np.ndarray, terms, lag: int) -> tuple[np.ndarray, np.ndarray]:
    a = series[lag - 1 : -1]
    b = series[lag - 2 : -2] if lag >= 2 else np.zeros_like(a)
    X = np.column_stack([CANDIDATES[t](a, b) for t in terms])
    return X, series[lag:]


def forward_select(X: np.ndarray, y: np.ndarray, names, min_gain: float = 0.01,
                   f_min: float = 0.0, tol: float = 1e-12):
    """Orthogonal forward regression ranked by error reduction ratio.

    Terms are added while each one lowers the residual sum of squares by at
    least ``min_gain`` (relative) and, when ``f_min > 0``, while the partial
    F statistic of the reduction reaches ``f_min``. Near-ties go to the
    earlier candidate.

    Returns
    -------
    selected : list of int
    err : list of float
        Error reduction ratio of each selected term.
    """
    yy = float(y @ y)
    if yy == 0.0:
        return [0], [1.0]
    W = []  # orthogonalized selected columns
    selected, errs = [], []
    rss = yy
    remaining = list(range(X.shape[1]))
    while remaining:
        best, best_err, best_w = None, -np.inf, None
        for j in remaining:
            w = X[:, j].astype(float).copy()
            for v in W:
                w -= (v @ w) / (v @ v) * v
            ww = w @ w
            if ww <= tol * max(1.0, X[:, j] @ X[:, j]):
                continue
            err = (w @ y) ** 2 / (ww * yy)
            if err > best_err * (1 + 1e-9) + 1e-15:
                best, best_err, best_w = j, err, w
        if best is None:
            break
        new_rss = rss - best_err * yy
        if selected and (rss - new_rss) < min_gain * rss:
            break
        dof = y.size - len(selected) - 1
        if selected and f_min > 0 and dof > 0 and new_rss > 1e-24 * yy:
            if (rss - new_rss) / (new_rss / dof) < f_min:
                break
        selected.append(best)
        errs.append(float(best_err))
        W.append(best_w)
        remaining.remove(best)
        rss = max(new_rss, 0.0)
        if rss <= 1e-24 * yy:
            break
    return selected, errs


class NarxDegradation(RegressorMixin, BaseEstimator):
    """One-step degradation model ``p_k = g(p_{k-1}, p_{k-2}) + e_k``.

    ``fit`` takes the estimate series itself (one column). The time unit is
    the series index, i.e. the diagnosis period.

    Parameters
    ----------
    max_lag : int
        Autoregressive depth (1 or 2).
    min_gain : float
        Relative residual-sum-of-squares reduction a new term must achieve.
    ridge : float
        Ridge strength used only if the selected regressors are collinear.
    f_min : float
        Partial F threshold guarding against terms that only fit estimate
        noise; 0 disables it.
    noise_term : bool
        Add a lag-1 residual (moving average) term fitted on the residuals;
        rollouts then bootstrap residuals instead of drawing Gaussian noise.
    """

    def __init__(self, max_lag=2, min_gain=0.01, f_min=10.0, ridge=1e-8, noise_term=False):
        self.max_lag = max_lag
        self.min_gain = min_gain
        self.f_min = f_min
        self.ridge = ridge
        self.noise_term = noise_term

    def fit(self, X, y=None):
        series = check_array(X, ensure_2d=False, ensure_min_samples=1).reshape(-1)
        lag = int(self.max_lag)
        if lag not in (1, 2):
            raise ValueError("max_lag must be 1 or 2")
        if series.size < lag + 3:
            raise InsufficientData(f"need at least {lag + 3} points, got {series.size}")
        names = _terms_for(lag)
        D, target = _design(series, names, lag)
        sel, err = forward_select(D, target, names, self.min_gain, self.f_min)
        Xs = D[:, sel]
        self.rank_deficient_ = bool(np.linalg.matrix_rank(Xs) < Xs.shape[1])
        if self.rank_deficient_:
            warnings.warn("collinear regressors, falling back to ridge", RankDeficient)
            A = Xs.T @ Xs + self.ridge * np.eye(Xs.shape[1])
            coef = np.linalg.solve(A, Xs.T @ target)
        else:
            coef = np.linalg.lstsq(Xs, target, rcond=None)[0]
        resid = target - Xs @ coef
        self.terms_ = [names[j] for j in sel]
        self.err_ = err
        self.coef_ = coef
        self.lag_ = lag
        self.residuals_ = resid
        self.residual_var_ = float(resid @ resid / max(resid.size, 1))
        self.ma_coef_ = 0.0
        if self.noise_term and resid.size > 2 and resid[:-1] @ resid[:-1] > 0:
            self.ma_coef_ = float(resid[1:] @ resid[:-1] / (resid[:-1] @ resid[:-1]))
        self.series_ = series.copy()
        self.n_features_in_ = 1
        return self

    def _g(self, a, b):
        return sum(c * CANDIDATES[t](a, b) for c, t in zip(self.coef_, self.terms_))

    def predict(self, X):
        """One-step predictions from lag rows ``[p_{k-1}, p_{k-2}]``."""
        check_is_fitted(self, "coef_")
        X = check_array(X)
        a = X[:, 0]
        b = X[:, 1] if X.shape[1] > 1 else np.zeros_like(a)
        return np.asarray(self._g(a, b), float) * np.ones_like(a)

    def step(self, a: float, b: float) -> float:
        check_is_fitted(self, "coef_")
        return float(self._g(np.asarray(a, float), np.asarray(b, float)))

    def to_dict(self) -> dict:
        check_is_fitted(self, "coef_")
        return {
            "terms": list(self.terms_),
            "coef": self.coef_.tolist(),
            "residual_var": self.residual_var_,
            "lag": self.lag_,
            "rank_deficient": self.rank_deficient_,
            "ma_coef": self.ma_coef_,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class EstimateHistory:
    """Ordered diagnosis estimates ``(t, p_hat)`` for one fault."""

    fault_index: int
    t: list = field(default_factory=list)
    p: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if len(self.t) != len(self.p):
            raise ValueError("t and p lengths differ")

    def append(self, t: float, p: float) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError(f"timestamp {t} is not after {self.t[-1]}")
        if not 0.0 <= p <= 1.0:
            raise ValueError("estimate outside [0, 1]")
        self.t.append(float(t))
        self.p.append(float(p))

    def __len__(self):
        return len(self.t)

    @property
    def period(self) -> float:
        return float(np.median(np.diff(self.t))) if len(self.t) > 1 else 1.0


def fit_degradation(history: EstimateHistory, **config) -> NarxDegradation:
    return NarxDegradation(**config).fit(np.asarray(history.p))


def update(model: NarxDegradation, history: EstimateHistory, t: float, p: float) -> NarxDegradation:
    """Append ``(t, p)`` to ``history`` and refit a fresh model on all of it."""
    history.append(t, p)
    return NarxDegradation(**model.get_params()).fit(np.asarray(history.p))
