import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile(
    "fuelres", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fuelres")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="also run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("FUELRES_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; use --runslow or FUELRES_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def twin():
    from fuelres.twin import get_twin

    return get_twin()


@pytest.fixture(scope="session")
def mini_twin():
    from fuelres.twin import FuelTwin, load_topology

    return FuelTwin(load_topology(FIXTURES / "mini_network.yaml"))


@pytest.fixture
def mini_problem():
    from fuelres.planner import PlanningProblem
    from fuelres.twin import FaultVector

    return PlanningProblem(
        dt=100, horizon=300, faults=FaultVector.from_dict({"leak_fault_4": 0.3}).values,
        initial_valves=(1, 1, 1, 1, 0), pump_levels=(3.035, 4.0), tank_capacity=(700, 700),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS, line

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(line(n))
