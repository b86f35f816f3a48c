import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from fuelres.harness.profiles import degradation_profile, failure_time
from fuelres.prognostics import (
    EstimateHistory,
    InsufficientData,
    NarxDegradation,
    Prognoser,
    estimate_rul,
    extrapolate,
    fit_degradation,
    forward_select,
    update,
)


def history(ts, ps, fault=1):
    h = EstimateHistory(fault)
    for t, p in zip(ts, ps):
        h.append(t, p)
    return h


@given(st.floats(0.0, 0.2), st.floats(1e-3, 0.03))
def test_ramp_recovered_exactly(p0, c):
    series = p0 + c * np.arange(12)
    series = series[series <= 1.0]
    if series.size < 6:
        return
    m = NarxDegradation().fit(series)
    for a in (0.1, 0.5, 0.9):
        assert m.step(a, a - c) == pytest.approx(a + c, abs=1e-9)


@given(st.floats(1.01, 1.2), st.floats(0.01, 0.1))
def test_geometric_recovered_exactly(r, p0):
    # p_k + 1 = r (p_{k-1} + 1): the sampled exponential profile
    series = [p0]
    while len(series) < 10:
        series.append(r * (series[-1] + 1) - 1)
    series = np.array(series)
    if series.max() > 1:
        return
    m = NarxDegradation().fit(series)
    for a in (0.2, 0.7):
        assert m.step(a, 0.0) == pytest.approx(r * (a + 1) - 1, abs=1e-9)


def test_exact_ramp_rul():
    ts = np.arange(10.0, 410.0, 10.0)
    h = history(ts, ts / 1200)
    m = fit_degradation(h)
    est = estimate_rul(m, h, p_max=0.8, n_rollouts=0)
    # interpolated between the samples around 0.8, which sits exactly at 960 s
    assert est.crossing_time == pytest.approx(960.0, abs=1e-6)
    assert est.t_now == 400.0


def test_crossing_times_analytic():
    assert failure_time("linear") == pytest.approx(960.0, abs=1e-9)
    assert failure_time("exp") == pytest.approx(500 + 400 * math.log2(1.8), abs=1e-12)
    assert failure_time("exp") == pytest.approx(839.19876, abs=1e-5)
    for kind in ("linear", "exp"):
        tf = failure_time(kind)
        assert degradation_profile(kind, tf) == pytest.approx(0.8, abs=1e-12)
        assert degradation_profile(kind, tf - 1e-3) < 0.8
        assert degradation_profile(kind, 1800.0) == 0.8


def test_profiles_shape():
    t = np.array([0.0, 499.0, 500.0, 900.0])
    np.testing.assert_allclose(degradation_profile("exp", t), [0, 0, 0, 0.8])
    assert degradation_profile("linear", 600.0) == 0.5
    with pytest.raises(ValueError):
        degradation_profile("cubic", 1.0)


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        NarxDegradation().fit([0.1, 0.2, 0.3, 0.4])
    p = Prognoser()
    assert p.rul(1) is None and p.forecast(1, 0.0, 100.0) is None


def test_history_validation():
    h = history([1.0, 2.0], [0.1, 0.2])
    with pytest.raises(ValueError):
        h.append(2.0, 0.3)
    with pytest.raises(ValueError):
        h.append(3.0, 1.3)


def test_update_refits_fresh():
    ts = np.arange(10.0, 110.0, 10.0)
    h = history(ts, ts / 1200)
    m = fit_degradation(h)
    m2 = update(m, h, 110.0, 110.0 / 1200)
    assert m2 is not m and len(h) == 11
    assert m2.get_params() == m.get_params()


def test_forward_select_prefers_true_terms():
    rng = np.random.default_rng(0)
    a = rng.random(50)
    X = np.column_stack([np.ones(50), a, a * a])
    sel, err = forward_select(X, 0.3 + 2.0 * a, ["1", "a", "a2"])
    assert sorted(sel) == [0, 1]
    assert sum(err) == pytest.approx(1.0, abs=1e-9)


def test_extrapolate_clamps():
    m = NarxDegradation().fit(np.linspace(0.1, 0.9, 9))
    t, p = extrapolate(m, [0.8, 0.9], 100.0, 50.0, 10.0)
    assert t[0] == 100.0 and p[0] == 0.9
    assert p.max() <= 1.0 and t.size == 6
    with pytest.raises(ValueError):
        extrapolate(m, [0.9], 0.0, 10.0, 0.0)


def test_prognoser_forecast_and_onset():
    pr = Prognoser(n_rollouts=50)
    for t in np.arange(10.0, 600.0, 10.0):
        pr.observe(4, t, degradation_profile("linear", t))
    assert pr.histories[4].t[0] == 70.0  # values <= 0.05 precede onset
    f = pr.forecast(4, 590.0, 1000.0)
    assert f(590.0) == pytest.approx(590 / 1200, abs=1e-9)
    assert f(800.0) == pytest.approx(800 / 1200, abs=1e-6)
    est = pr.rul(4)
    lo, hi = est.band
    assert lo <= est.rul + 10 and hi >= est.rul - 10
    assert '"fault": 4' in est.to_json()


def test_estimator_api():
    m = NarxDegradation(max_lag=1)
    assert clone(m).get_params() == m.get_params()
    m.fit(np.linspace(0.1, 0.5, 10))
    X = np.array([[0.2, 0.15], [0.3, 0.25]])
    assert m.predict(X).shape == (2,)
    with pytest.raises(ValueError):
        NarxDegradation(max_lag=3).fit(np.linspace(0, 1, 10))
