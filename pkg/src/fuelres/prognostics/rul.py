"""Extrapolation of degradation models and remaining-useful-life estimates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .narx import EstimateHistory, InsufficientData, NarxDegradation


@dataclass
class RulEstimate:
    fault_index: int
    p_max: float
    t_now: float
    rul: float  # seconds; math.inf when no crossing within the horizon
    trajectory_t: np.ndarray
    trajectory_p: np.ndarray
    band: tuple[float, float] | None = None  # 10th / 90th percentile RUL
    model: dict = field(default_factory=dict)

    @property
    def crossing_time(self) -> float:
        return self.t_now + self.rul

    def to_dict(self) -> dict:
        enc = lambda x: None if x is None or not math.isfinite(x) else float(x)  # noqa: E731
        return {
            "fault": self.fault_index,
            "p_max": self.p_max,
            "t_now": self.t_now,
            "rul": enc(self.rul),
            "band": None if self.band is None else [enc(self.band[0]), enc(self.band[1])],
            "model": self.model,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trajectory_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.trajectory_t, self.trajectory_p]),
                   delimiter=",", header="t,p", comments="", fmt="%.9g")


def _last_two(series) -> tuple[float, float]:
    s = np.asarray(series, float)
    return float(s[-1]), float(s[-2] if s.size > 1 else s[-1])


def extrapolate(model: NarxDegradation, last, t0: float, horizon: float, step: float,
                lo: float = 0.0, hi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the one-step map from the last observations.

    Parameters
    ----------
    last : sequence of float
        Most recent observations, oldest first (at least one).
    t0 : float
        Time of ``last[-1]``.
    horizon, step : float
        Seconds to extrapolate and seconds per model step.

    Returns
    -------
    t, p : ndarray
        Trajectory starting at ``(t0, last[-1])``; values clamped to ``[lo, hi]``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor(horizon / step + 1e-9))
    a, b = _last_two(last)
    out = [a]
    for _ in range(n):
        nxt = min(max(model.step(a, b), lo), hi)
        b, a = a, nxt
        out.append(nxt)
    return t0 + step * np.arange(n + 1), np.array(out)


def _first_crossing(t, p, p_max) -> float:
    """Time where ``p`` first exceeds ``p_max``, interpolated within the step."""
    idx = np.flatnonzero(p > p_max)
    if not idx.size:
        return math.inf
    k = idx[0]
    if k == 0:
        return float(t[0])
    frac = (p_max - p[k - 1]) / (p[k] - p[k - 1])
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


def estimate_rul(
    model: NarxDegradation,
    history: EstimateHistory,
    p_max: float = 0.8,
    max_horizon: float = 1800.0,
    n_rollouts: int = 200,
    seed: int | None = 0,
) -> RulEstimate:
    """Time until the extrapolated fault parameter first exceeds ``p_max``.

    The point estimate follows the noise-free recursion; when ``n_rollouts``
    is positive, rollouts with residual noise give a 10th/90th percentile band.
    """
    if max_horizon <= 0:
        raise ValueError("max_horizon must be positive")
    t_now = float(history.t[-1])
    step = history.period
    if history.p[-1] > p_max:
        tt = np.array([t_now])
        pp = np.array([history.p[-1]])
        return RulEstimate(history.fault_index, p_max, t_now, 0.0, tt, pp, (0.0, 0.0), model.to_dict())
    tt, pp = extrapolate(model, history.p[-2:], t_now, max_horizon, step)
    rul = _first_crossing(tt, pp, p_max) - t_now
    band = None
    if n_rollouts > 0:
        band = _rollout_band(model, history, p_max, max_horizon, step, n_rollouts, seed)
    return RulEstimate(history.fault_index, p_max, t_now, rul, tt, pp, band, model.to_dict())


def _rollout_band(model, history, p_max, horizon, step, n, seed):
    rng = np.random.default_rng(seed)
    sd = math.sqrt(max(model.residual_var_, 0.0))
    n_steps = int(math.floor(horizon / step + 1e-9))
    a = np.full(n, history.p[-1], float)
    b = np.full(n, history.p[-2] if len(history) > 1 else history.p[-1], float)
    e_prev = np.zeros(n)
    cross = np.full(n, math.inf)
    resid = model.residuals_
    for k in range(1, n_steps + 1):
        if model.noise_term and resid.size:
            e = rng.choice(resid, size=n)
        else:
            e = rng.standard_normal(n) * sd
        nxt = np.clip(model._g(a, b) + e + model.ma_coef_ * e_prev, 0.0, 1.0)
        newly = (nxt > p_max) & np.isinf(cross)
        frac = (p_max - a[newly]) / (nxt[newly] - a[newly])
        cross[newly] = (k - 1 + frac) * step
        b, a, e_prev = a, nxt, e
    return float(np.percentile(cross, 10)), float(np.percentile(cross, 90))


class Prognoser:
    """Online per-fault prognosis: collects estimates and refits on demand.

    Parameters
    ----------
    p_max : float
        Failure threshold.
    detect_eps : float
        Estimates at or below this value are treated as the pre-onset phase
        and are not used for fitting.
    """

    def __init__(self, p_max: float = 0.8, detect_eps: float = 0.05, max_horizon: float = 1800.0,
                 n_rollouts: int = 200, **model_params):
        self.p_max = p_max
        self.detect_eps = detect_eps
        self.max_horizon = max_horizon
        self.n_rollouts = n_rollouts
        self.model_params = model_params
        self.histories: dict[int, EstimateHistory] = {}
        self.models: dict[int, NarxDegradation] = {}

    def observe(self, fault: int, t: float, p: float) -> None:
        hist = self.histories.get(fault)
        if hist is None:
            if p <= self.detect_eps:
                return
            hist = self.histories[fault] = EstimateHistory(fault)
        hist.append(t, min(max(p, 0.0), 1.0))

    def model(self, fault: int) -> NarxDegradation | None:
        hist = self.histories.get(fault)
        if hist is None:
            return None
        try:
            m = NarxDegradation(**self.model_params).fit(np.asarray(hist.p))
        except InsufficientData:
            return None
        self.models[fault] = m
        return m

    def rul(self, fault: int, seed: int | None = 0) -> RulEstimate | None:
        m = self.model(fault)
        if m is None:
            return None
        return estimate_rul(m, self.histories[fault], self.p_max, self.max_horizon,
                            self.n_rollouts, seed)

    def forecast(self, fault: int, t_from: float, horizon: float, step: float = 1.0):
        """Predicted fault value as a function of time, or None without a model.

        The returned callable holds the last observation constant before the
        first extrapolated sample.
        """
        m = self.model(fault)
        hist = self.histories.get(fault)
        if m is None:
            return None
        tt, pp = extrapolate(m, hist.p[-2:], hist.t[-1], horizon + (t_from - hist.t[-1]), hist.period)

        def f(t):
            return float(np.interp(t, tt, pp, left=pp[0], right=pp[-1]))

        return f
