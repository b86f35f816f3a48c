"""Ground-truth leak degradation profiles."""

from __future__ import annotations

import math

import numpy as np

P_FAIL = 0.8
LINEAR_RATE = 1.0 / 1200.0
EXP_START = 500.0
EXP_TAU = 400.0

PROFILES = ("linear", "exp")


def failure_time(kind: str) -> float:
    """Time at which the profile reaches the failure level 0.8."""
    if kind == "linear":
        return P_FAIL / LINEAR_RATE
    if kind in ("exp", "exponential"):
        return EXP_START + EXP_TAU * math.log2(1.0 + P_FAIL)
    raise ValueError(f"unknown degradation profile {kind!r}")


def degradation_profile(kind: str, t):
    """Leak severity at time ``t`` (scalar or array), capped at 0.8.

    ``linear`` ramps as ``t / 1200`` from zero; ``exp`` stays at zero until
    500 s and then grows as ``2**((t - 500) / 400) - 1``.
    """
    t = np.asarray(t, float)
    if kind == "linear":
        v = np.clip(t * LINEAR_RATE, 0.0, None)
    elif kind in ("exp", "exponential"):
        v = np.where(t < EXP_START, 0.0, np.exp2((np.maximum(t, EXP_START) - EXP_START) / EXP_TAU) - 1.0)
    else:
        raise ValueError(f"unknown degradation profile {kind!r}")
    v = np.minimum(v, P_FAIL)
    return float(v) if v.ndim == 0 else v
