"""Fault probabilities from optimizer sample traces, and entropy."""

from __future__ import annotations

from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .estimate import SampleTrace


class DegenerateLikelihood(RuntimeError):
    """No sample of any hypothesis has a finite log-likelihood."""


def log_likelihoods(trace: SampleTrace, sigma: np.ndarray) -> np.ndarray:
    """Gaussian log-likelihood of the window at every sample, up to a constant."""
    sigma = np.asarray(sigma, float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be strictly positive")
    with np.errstate(invalid="ignore"):
        ll = -0.5 * (trace.sse / sigma**2).sum(axis=1)
    return np.where(np.isnan(ll), -np.inf, ll)


def fault_probabilities(
    traces: Mapping[int, SampleTrace],
    sigma: np.ndarray,
    eps: Mapping[int, float] | float = 0.05,
    nominal: Mapping[int, float] | None = None,
    weighting: str = "evidence",
) -> tuple[dict[int, float], dict[int, float]]:
    """Normalized fault probabilities.

    For each hypothesis ``i`` the raw probability is one minus the share of
    its sample likelihood mass lying inside the nominal band
    ``|p - nominal_i| <= eps_i``. Because that share is normalized within each
    hypothesis, any hypothesis whose best fit lies off-nominal scores close
    to one. With ``weighting="evidence"`` (default) the raw value is therefore
    multiplied by the hypothesis' maximum likelihood relative to the best
    hypothesis before normalizing; ``weighting="raw"`` normalizes the raw values
    directly.

    Returns
    -------
    q : dict
        Normalized probabilities, summing to one.
    q_bar : dict
        Raw per-hypothesis fault probabilities.
    """
    if weighting not in ("evidence", "raw"):
        raise ValueError("weighting must be 'evidence' or 'raw'")
    keys = sorted(traces)
    if not keys:
        raise ValueError("no hypotheses")
    nominal = nominal or {}
    q_bar, log_peak = {}, {}
    for i in keys:
        tr = traces[i]
        if tr.p.size == 0:
            raise ValueError(f"hypothesis {i} has no samples")
        ll = log_likelihoods(tr, sigma)
        log_peak[i] = ll.max()
        if not np.isfinite(log_peak[i]):
            q_bar[i] = 0.0
            continue
        e = eps[i] if isinstance(eps, Mapping) else eps
        band = np.abs(tr.p - nominal.get(i, 0.0)) <= e
        if not band.any():
            q_bar[i] = 1.0
            continue
        frac = np.exp(logsumexp(ll[band]) - logsumexp(ll))
        q_bar[i] = float(max(0.0, 1.0 - frac))
    peaks = np.array([log_peak[i] for i in keys])
    if not np.isfinite(peaks).any():
        raise DegenerateLikelihood("all log-likelihoods are -inf")
    raw = np.array([q_bar[i] for i in keys])
    if weighting == "evidence":
        w = np.exp(peaks - peaks.max())
        raw = raw * w
    total = raw.sum()
    if total <= 0:
        q = np.full(len(keys), 1.0 / len(keys))
    else:
        q = raw / total
    return dict(zip(keys, q.tolist())), q_bar


def entropy(q) -> float:
    """Shannon entropy in nats of ``q`` renormalized to sum to one (0 log 0 = 0)."""
    q = np.asarray(list(q.values()) if isinstance(q, Mapping) else q, float)
    if q.size == 0:
        return 0.0
    if np.any(q < 0):
        raise ValueError("probabilities must be non-negative")
    s = q.sum()
    if s <= 0:
        return 0.0
    q = q / s
    nz = q[q > 0]
    return float(-(nz * np.log(nz)).sum())
