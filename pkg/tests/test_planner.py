from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuelres.planner import (
    FSTS,
    TIME_PASSING,
    Budget,
    ConfigError,
    Plan,
    PlanningProblem,
    PlanStep,
    ReplayDivergence,
    heuristic,
    heuristic_value,
    load_problem,
    plan,
    problem_from_dict,
    simulate_plan,
    validate_plan,
)
from fuelres.planner.search import _pareto_nd, pareto2
from fuelres.twin import FaultVector

from oracles import mini_oracle


def test_heuristic_oracle():
    # (0.5*0.2 - 0.5*0.1) * 1.5 * (1200/1800) = 0.05
    assert heuristic_value(0.2, 0.1, 600.0, 1800.0) == pytest.approx(0.05, abs=1e-15)
    assert heuristic_value(0.2, 0.1, 600.0, 1800.0, sign="plus") == pytest.approx(0.15, abs=1e-15)
    assert heuristic_value(0.3, 0.7, 1800.0, 1800.0) == 0.0


def test_heuristic_on_state():
    pr = PlanningProblem()
    s = FSTS(pr).initial_state()
    s = replace(s, t=600.0, deviation=0.2 * 601 * 2, imbalance=0.1 * 7200)
    assert heuristic(s, pr) == pytest.approx(0.05, abs=1e-12)


def test_grounded_actions():
    fs = FSTS(PlanningProblem())
    assert len(fs.actions) == 26
    names = {(h.name, h.target) for h in fs.actions}
    assert ("open", "valve_16") in names and ("decrease", "pump_2") in names
    assert fs.valve_names[0] == "valve_6" and fs.valve_names[-1] == "valve_16"


def test_guards():
    fs = FSTS(PlanningProblem())
    s = fs.initial_state()
    by = {(h.name, h.target): h for h in fs.actions}
    assert not fs.applicable(s, by[("open", "valve_6")])
    assert fs.applicable(s, by[("open", "valve_8")])
    with pytest.raises(ValueError):
        fs.successor(s, by[("close", "valve_8")])
    top = replace(s, pumps=(6, 6))
    assert not fs.applicable(top, by[("increase", "pump_1")])


def test_dead_state_absorbs():
    fs = FSTS(PlanningProblem())
    dead = replace(fs.initial_state(), dead=True)
    assert fs.successor(dead, TIME_PASSING) is dead
    assert fs.successor(dead, fs.actions[0]) is dead
    assert not fs.applicable(dead, TIME_PASSING)


def test_nominal_run_reaches_goal():
    fs = FSTS(PlanningProblem(dt=300))
    rep = simulate_plan(Plan([]), fs, strict=True)
    end = rep.states[-1]
    assert end.goal_reached and end.t == 1800.0
    assert rep.metrics["fuel_lost_pct"] == pytest.approx(0.0, abs=1e-9)
    assert rep.metrics["R"] > 0.95


def test_band_violation_event():
    f = FaultVector.from_dict({"leak_fault_5": 0.7}).values
    fs = FSTS(PlanningProblem(dt=300, faults=f))
    with pytest.raises(ReplayDivergence, match="engine_massflow_drop"):
        validate_plan(Plan([]), fs)
    rep = simulate_plan(Plan([]), fs)
    assert "engine_massflow_drop" in rep.states[-1].fired
    assert not rep.states[-1].goal_reached


def test_replay_rejects_bad_times_and_guards():
    fs = FSTS(PlanningProblem(dt=300))
    with pytest.raises(ReplayDivergence):
        simulate_plan(Plan([PlanStep(150.0, "open", "valve_8")]), fs)
    with pytest.raises(ReplayDivergence, match="guard"):
        simulate_plan(Plan([PlanStep(0.0, "open", "valve_6")]), fs)


def test_plan_text_roundtrip(tmp_path):
    p = Plan([PlanStep(0.0, "close", "valve_6"), PlanStep(200.0, "increase", "pump_1")])
    assert p.to_text() == "0.000: close valve_6 [0.0]\n200.000: increase pump_1 [0.0]\n"
    p.write(tmp_path / "a.plan")
    assert Plan.read(tmp_path / "a.plan").steps == p.steps
    with pytest.raises(ValueError):
        Plan.from_text("5.000: open valve_8 [0.0]\n1.000: open valve_8 [0.0]\n")
    with pytest.raises(ValueError):
        Plan.from_text("garbage")


def test_mini_oracle_equivalence(mini_twin, mini_problem):
    fs = FSTS(mini_problem, mini_twin)
    best, _ = mini_oracle(fs)
    res = plan(fs, Budget(nodes=None, seconds=30), mode="anytime")
    assert res.exhausted
    assert res.best.metrics["R"] == pytest.approx(best, abs=1e-9)


def test_anytime_quality_monotone_in_budget(mini_twin, mini_problem):
    fs = FSTS(mini_problem, mini_twin)
    values = []
    for nodes in (3, 5, 8, 20, None):
        res = plan(fs, Budget(nodes=nodes, seconds=None), mode="anytime")
        values.append(res.best.metrics["R"] if res.best else -np.inf)
    assert values == sorted(values)
    rs = [p.metrics["R"] for p in res.plans]
    assert rs == sorted(rs, reverse=True)


def test_replay_is_deterministic(mini_twin, mini_problem):
    fs = FSTS(mini_problem, mini_twin)
    best = plan(fs, mode="first").best
    a = validate_plan(best, FSTS(mini_problem, mini_twin))
    b = validate_plan(Plan.from_text(best.to_text()), FSTS(mini_problem, mini_twin))
    assert [s.key() for s in a.states] == [s.key() for s in b.states]
    assert a.metrics == best.metrics


def test_dt_refinement_keeps_plan_feasible(mini_twin, mini_problem):
    coarse = FSTS(mini_problem, mini_twin)
    best = plan(coarse, mode="first").best
    fine = FSTS(replace(mini_problem, dt=50.0), mini_twin)
    rep = validate_plan(Plan(best.steps), fine)
    assert rep.metrics["R"] == pytest.approx(best.metrics["R"], abs=1e-9)


def test_unrepairable_is_exhausted_not_expired():
    f = FaultVector.from_dict({"leak_fault_1": 0.25}).values
    res = plan(FSTS(PlanningProblem(faults=f)), Budget(nodes=10, seconds=60))
    assert res.unrepairable and not res.expired and res.best is None


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget(nodes=0)
    with pytest.raises(ValueError):
        plan(FSTS(PlanningProblem()), mode="greedy")


def test_problem_validation():
    with pytest.raises(ConfigError):
        PlanningProblem(dt=70)
    with pytest.raises(ConfigError):
        PlanningProblem(initial_pumps=(3.1, 3.035))
    with pytest.raises(ConfigError):
        PlanningProblem(heuristic_sign="minus")
    with pytest.raises(ConfigError):
        FSTS(PlanningProblem(initial_valves=(1, 1)))


def test_config_file(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(
        "dt: 100\nfaults: {leak_fault_5: 0.4}\ninitial: {valves: {valve_8: 0, valve_15: 0, valve_16: 0}}\n"
        "degradation: {fault: 5, profile: exp}\nsearch: {mode: anytime, nodes: 50, seconds: 5}\n"
    )
    pr, budget, mode = load_problem(path)
    assert pr.initial_valves == (1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0)
    assert mode == "anytime" and budget.nodes == 50
    assert pr.fault_at(400.0)[4] == 0.0
    assert pr.fault_at(900.0)[4] == 0.8
    for bad in ({"dt": 100, "bogus": 1}, {"initial": {"valves": {"valve_99": 0}}},
                {"search": {"mode": "sideways"}}, {"constraints": {"engine_band": [1.3]}},
                {"faults": {"leak_fault_9": 0.1}}):
        with pytest.raises(ConfigError):
            problem_from_dict(bad)


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=30))
def test_pareto2_front(pts):
    P = np.array(pts)
    F = pareto2(P)
    # every input point is weakly dominated by a front point
    assert all(((F <= p + 1e-6).all(1)).any() for p in P)
    # front points do not dominate one another
    for i in range(len(F)):
        for j in range(len(F)):
            if i != j:
                assert not ((F[j] <= F[i]).all() and (F[j] < F[i]).any())


@given(st.lists(st.tuples(*[st.integers(0, 5)] * 3), min_size=1, max_size=20))
def test_pareto_nd_keeps_one_of_each_tie(pts):
    X = np.array(pts, float)
    keep = _pareto_nd(X)
    kept = X[keep]
    assert len({tuple(r) for r in kept}) == len(kept)
    for x in X:
        assert ((kept <= x).all(1)).any()
