from .topology import (
    FAULT_NAMES,
    INPUT_NAMES,
    LEAK_FAULTS,
    OUTPUT_NAMES,
    STUCK_FAULTS,
    NetworkTopology,
    TopologyError,
    load_topology,
)
from .vectors import FaultVector, InputVector, NoiseModel, OutputVector
from .solver import FuelTwin, SingularNetwork, get_twin, solve_steady_state

__all__ = [
    "FAULT_NAMES",
    "INPUT_NAMES",
    "LEAK_FAULTS",
    "OUTPUT_NAMES",
    "STUCK_FAULTS",
    "NetworkTopology",
    "TopologyError",
    "load_topology",
    "FaultVector",
    "InputVector",
    "NoiseModel",
    "OutputVector",
    "FuelTwin",
    "SingularNetwork",
    "get_twin",
    "solve_steady_state",
]

from .window import CSV_HEADER, MeasurementWindow, sense, simulate_horizon

__all__ += ["CSV_HEADER", "MeasurementWindow", "sense", "simulate_horizon"]
