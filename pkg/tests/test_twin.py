import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuelres.twin import (
    FAULT_NAMES,
    INPUT_NAMES,
    OUTPUT_NAMES,
    FaultVector,
    FuelTwin,
    InputVector,
    MeasurementWindow,
    NoiseModel,
    NetworkTopology,
    TopologyError,
    load_topology,
    sense,
    simulate_horizon,
    solve_steady_state,
)
from fuelres.twin.vectors import U_LOWER, U_UPPER, nominal_fault_array

unit = st.floats(0.0, 1.0, allow_nan=False)
ref = st.floats(0.0, 5.0, allow_nan=False)


@st.composite
def operating_point(draw):
    u = np.array([draw(ref), draw(ref)] + [draw(unit) for _ in range(11)])
    p = nominal_fault_array()
    p[:8] = [draw(unit) for _ in range(8)]
    return u, p


def random_points(n, seed=0):
    rng = np.random.default_rng(seed)
    U = rng.uniform(0, 1, (n, 13))
    U[:, :2] *= 5.0
    P = np.tile(nominal_fault_array(), (n, 1))
    P[:, :8] = rng.uniform(0, 1, (n, 8)) * (rng.random((n, 8)) < 0.3)
    return U, P


def test_vector_orders():
    assert len(INPUT_NAMES) == 13 and INPUT_NAMES[2] == "control_valve_6"
    assert len(FAULT_NAMES) == 19 and FAULT_NAMES[8] == "stuckAt_valve_6"
    assert len(OUTPUT_NAMES) == 14 and OUTPUT_NAMES[8] == "pressure_3"


def test_input_vector_bounds():
    with pytest.raises(ValueError):
        InputVector(np.r_[6.0, np.zeros(12)])
    with pytest.raises(KeyError):
        InputVector.from_dict({"valve_99": 1.0})
    u = InputVector.nominal()
    assert u["control_valve_8"] == 0.0 and u["control_valve_6"] == 1.0 and u["reference_1"] == 3.035


def test_fault_vector_roundtrip():
    f = FaultVector.from_dict({"leak_fault_3": 0.4, "stuckAt_valve_11": 1.0})
    assert f.active() == ["leak_fault_3", "stuckAt_valve_11"]
    assert FaultVector.from_dict(f.to_dict()).to_dict() == f.to_dict()
    with pytest.raises(ValueError):
        FaultVector.single(2, 1.5)


def test_nominal_operating_point(twin):
    y = solve_steady_state(None, InputVector.nominal())
    # straight lines, no leak: tank flow equals engine flow on both sides
    assert y["massFlow_1"] == pytest.approx(y["massFlow_7"], abs=1e-9)
    assert y["massFlow_2"] == pytest.approx(y["massFlow_8"], abs=1e-9)
    assert y["massFlow_7"] == pytest.approx(1.0, abs=0.05)


def test_mass_balance_batch(twin):
    U, P = random_points(500, seed=3)
    st_ = twin.solve_state(U, P)
    assert np.abs(twin.mass_residual(st_)).max() < 1e-9


@given(operating_point())
def test_mass_balance_property(twin, up):
    u, p = up
    st_ = twin.solve_state(u, p)
    assert np.abs(twin.mass_residual(st_)).max() < 1e-9
    # check-valved edges never carry reverse flow
    q = st_["flow"][0]
    assert (q[twin.check_edges] >= -1e-9).all()


@given(operating_point(), st.integers(0, 10), unit)
def test_stuck_equivalence(twin, up, valve, c):
    """A valve stuck at c behaves like a healthy valve commanded to c."""
    u, p = up
    stuck = p.copy()
    stuck[8 + valve] = c
    commanded = u.copy()
    commanded[2 + valve] = c
    np.testing.assert_allclose(twin.solve(u, stuck), twin.solve(commanded, p), rtol=0, atol=1e-9)


@given(operating_point())
def test_nominal_identity(twin, up):
    """Zero leaks and no stuck valves match the network with leak edges removed."""
    u, _ = up
    bare = FuelTwin(load_topology().without_leaks())
    np.testing.assert_allclose(twin.solve(u, nominal_fault_array()), bare.solve(u, nominal_fault_array()),
                               rtol=0, atol=1e-6)


@given(operating_point(), st.integers(0, 7), st.floats(0.05, 1.0))
def test_leak_never_raises_delivery(twin, up, leak, mag):
    u, p = up
    p = p.copy()
    p[:8] = 0.0
    _, e0 = twin.tank_engine_flows(u[None], p[None])
    p[leak] = mag
    _, e1 = twin.tank_engine_flows(u[None], p[None])
    assert (e1 <= e0 + 1e-9).all()


def test_line_symmetry(twin):
    topo = twin.topology
    perm = topo.swap_lines()
    U, P = random_points(50, seed=5)
    iu = [INPUT_NAMES.index(perm.get(n, n)) for n in INPUT_NAMES]
    ip = [FAULT_NAMES.index(perm.get(n, n)) for n in FAULT_NAMES]
    io = [OUTPUT_NAMES.index(perm.get(n, n)) for n in OUTPUT_NAMES]
    Y = twin.solve(U, P)
    Ys = twin.solve(U[:, iu], P[:, ip])
    np.testing.assert_allclose(Ys, Y[:, io], rtol=1e-9, atol=1e-6)


def test_topology_validation():
    data = {"nodes": ["a"], "fixed_nodes": {"t": 1.0, "amb": 0.0},
            "edges": [{"name": "l", "kind": "leak", "src": "a", "dst": "t", "conductance": 1.0,
                       "fault": "leak_fault_1"}],
            "flow_sensors": {}, "pressure_sensors": {}}
    with pytest.raises(TopologyError, match="ambient"):
        NetworkTopology.from_dict(data)
    with pytest.raises(TopologyError):
        NetworkTopology.from_dict({"nodes": []})


def test_all_valves_closed_dead_heads(twin):
    u = np.r_[3.0, 3.0, np.zeros(11)]
    q = twin.solve_state(u, nominal_fault_array())["flow"][0]
    assert np.abs(q[twin.engine_edges]).max() < 1e-9
    assert np.abs(q[twin.pump_edges]).max() < 1e-9


def test_noise_is_seeded():
    y = np.zeros((5, 14))
    nm = NoiseModel.default(seed=7)
    a, b = sense(y, nm), sense(y, nm)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sense(y, NoiseModel.default(seed=8)))
    assert np.abs(a[:, :8]).max() < 0.1


def test_window_csv_roundtrip(tmp_path):
    w = simulate_horizon(None, [InputVector.nominal()] * 4, [FaultVector.single(2, 0.3)] * 4,
                         NoiseModel.default(seed=1), t0=10.0)
    w.to_csv(tmp_path / "w.csv")
    back = MeasurementWindow.from_csv(tmp_path / "w.csv")
    np.testing.assert_array_equal(back.y, w.y)
    np.testing.assert_array_equal(back.t, [10, 11, 12, 13])
    with pytest.raises(ValueError):
        MeasurementWindow([1.0, 1.0], np.zeros((2, 13)), np.zeros((2, 14)))


def test_bounds_constants():
    assert U_LOWER.shape == U_UPPER.shape == (13,)
