import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from fuelres.surrogate import (
    DisambiguationProblem,
    MLPSurrogate,
    SeparationObjective,
    TrainingSet,
    design_disambiguation_inputs,
    features,
    generate_training_data,
    surrogate_predict,
    twin_separation,
)
from fuelres.surrogate.disambiguation import _pair_objective
from fuelres.surrogate.mlp import backward, forward
from fuelres.twin import InputVector


@pytest.fixture(scope="module")
def small_data():
    return generate_training_data(n=3000, seed=1)


@pytest.fixture(scope="module")
def small_model(small_data):
    return MLPSurrogate(hidden=(16, 16), epochs=30, seed=0).fit(small_data.X, small_data.y)


def test_training_data_single_fault(small_data):
    assert len(small_data) == 3000
    assert ((small_data.p > 0).sum(1) <= 1).all()
    assert np.isfinite(small_data.y).all()
    a, b = small_data.split(1000)
    assert len(a) == 1000 and len(b) == 2000


def test_training_data_is_seeded():
    a = generate_training_data(n=50, seed=3)
    b = generate_training_data(n=50, seed=3)
    np.testing.assert_array_equal(a.y, b.y)


def test_training_set_roundtrip(tmp_path, small_data):
    small_data.save(tmp_path / "d.npz")
    back = TrainingSet.load(tmp_path / "d.npz")
    np.testing.assert_array_equal(back.X, small_data.X)


def test_features_layout():
    X = features(InputVector.nominal().values, np.arange(19.0) / 19)
    assert X.shape == (1, 21)
    assert X[0, 13] == 0.0 and X[0, 20] == pytest.approx(7 / 19)


def _fd_param_check(params, z, dout, idx, h=1e-6):
    _, acts = forward(params, z)
    grads, dz = backward(params, acts, dout)
    for li, flat in idx:
        P = params[li]
        old = P.flat[flat]
        P.flat[flat] = old + h
        fp = (forward(params, z)[0] * dout).sum()
        P.flat[flat] = old - h
        fm = (forward(params, z)[0] * dout).sum()
        P.flat[flat] = old
        fd = (fp - fm) / (2 * h)
        an = grads[li].flat[flat]
        assert abs(fd - an) <= 1e-4 * max(abs(fd), abs(an), 1e-3)
    return dz


def test_backprop_matches_finite_differences(small_model):
    rng = np.random.default_rng(0)
    params = [p.copy() for p in small_model.params_]
    z = rng.standard_normal((5, 21))
    dout = rng.standard_normal((5, 8))
    idx = [(li, int(rng.integers(params[li].size))) for li in range(len(params)) for _ in range(4)]
    dz = _fd_param_check(params, z, dout, idx)
    # input gradient too
    h = 1e-6
    for j in (0, 7, 20):
        zp, zm = z.copy(), z.copy()
        zp[:, j] += h
        zm[:, j] -= h
        fd = ((forward(params, zp)[0] - forward(params, zm)[0]) * dout).sum(1) / (2 * h)
        np.testing.assert_allclose(dz[:, j], fd, rtol=1e-4, atol=1e-7)


def test_objective_gradient(small_model):
    pr = DisambiguationProblem({3: 0.7, 5: 0.8}, tau=2)
    obj = SeparationObjective(small_model, pr)
    U = np.tile(InputVector.nominal().values, (3, 1))
    J, g = obj.value_and_grad(U)
    h = 1e-5
    for t, j in ((0, 0), (1, 5), (2, 12)):
        Up, Um = U.copy(), U.copy()
        Up[t, j] += h
        Um[t, j] -= h
        fd = (obj.value(Up) - obj.value(Um)) / (2 * h)
        assert g[t, j] == pytest.approx(fd, rel=1e-4, abs=1e-6)
    assert obj.n_evals == 7 and obj.n_rows == 7 * 3 * 2


@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 10_000))
def test_pair_objective_identity(H, T, seed):
    Y = np.random.default_rng(seed).standard_normal((H, T, 3))
    J, _ = _pair_objective(Y)
    brute = sum(((Y[i] - Y[j]) ** 2).sum() for i in range(H) for j in range(i + 1, H))
    assert J == pytest.approx(brute, rel=1e-10, abs=1e-10)


def test_checkpoint_roundtrip(tmp_path, small_model, small_data):
    path = tmp_path / "m.bin"
    small_model.save(path)
    back = MLPSurrogate.load(path)
    np.testing.assert_array_equal(back.predict(small_data.X[:50]), small_model.predict(small_data.X[:50]))
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ValueError, match="trailing"):
        MLPSurrogate.load(path)
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        MLPSurrogate.load(tmp_path / "bad.bin")


def test_sklearn_compat(small_model, small_data):
    c = clone(small_model)
    assert c.get_params() == small_model.get_params()
    assert not hasattr(c, "params_")
    assert small_model.score(small_data.X[:200], small_data.y[:200]) > 0.5


def test_surrogate_predict_accepts_full_fault_vector(small_model):
    u = InputVector.nominal().values
    p = np.zeros(19)
    p[8:] = np.nan
    y = surrogate_predict(small_model, u, p)
    assert y.shape[-1] == 8


def test_problem_validation():
    with pytest.raises(ValueError):
        DisambiguationProblem({3: 0.7})
    with pytest.raises(ValueError):
        DisambiguationProblem({3: 0.7, 12: 1.0})
    pr = DisambiguationProblem([(3, 0.7), (3, 0.7)])
    assert pr.faults == [3, 3]


def test_design_improves_and_stays_in_bounds(small_model):
    pr = DisambiguationProblem({3: 0.75, 5: 0.8}, tau=1, iterations=30, restarts=2)
    res = design_disambiguation_inputs(pr, small_model)
    assert res.objective >= res.initial_objective
    assert np.all(np.diff(res.history) >= 0)
    assert (res.U >= pr.lower - 1e-12).all() and (res.U <= pr.upper + 1e-12).all()
    assert twin_separation(res.U, {3: 0.75, 5: 0.8}) >= 0.0
