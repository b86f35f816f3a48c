"""Network topology: nodes, edges, sensor and fault bindings, config loading."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

INPUT_NAMES = (
    "reference_1",
    "reference_2",
    *(f"control_valve_{v}" for v in range(6, 17)),
)
OUTPUT_NAMES = (
    *(f"massFlow_{i}" for i in range(1, 9)),
    *(f"pressure_{i}" for i in range(3, 9)),
)
LEAK_FAULTS = tuple(f"leak_fault_{i}" for i in range(1, 9))
STUCK_FAULTS = tuple(f"stuckAt_valve_{v}" for v in range(6, 17))
FAULT_NAMES = LEAK_FAULTS + STUCK_FAULTS
VALVE_NAMES = tuple(f"valve_{v}" for v in range(6, 17))
PUMP_NAMES = ("pump_1", "pump_2")

EDGE_KINDS = ("pipe", "valve", "pump", "leak", "engine")
BAR = 1.0e5


class TopologyError(ValueError):
    """Raised when a topology config violates a structural invariant."""


@dataclass(frozen=True)
class Edge:
    name: str
    kind: str
    src: str
    dst: str
    conductance: float = 0.0
    control: str | None = None
    fault: str | None = None
    gain: float = 0.0
    slip: float = 0.0


@dataclass
class NetworkTopology:
    """Static description of the conductance network.

    Conductances are in kg/(s*bar); pump ``gain`` is the delivered flow per
    unit reference at zero outlet pressure and ``slip`` the internal
    back-flow conductance. Fixed nodes carry a prescribed pressure in bar.
    """

    nodes: list[str]
    fixed_nodes: dict[str, float]
    edges: list[Edge]
    flow_sensors: dict[str, str]
    pressure_sensors: dict[str, str]
    stuck_faults: dict[str, str] = field(default_factory=dict)
    subsystems: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    @property
    def edge_map(self) -> dict[str, Edge]:
        return {e.name: e for e in self.edges}

    @property
    def leak_edges(self) -> dict[str, Edge]:
        return {e.fault: e for e in self.edges if e.kind == "leak"}

    def validate(self) -> None:
        names = [e.name for e in self.edges]
        if len(set(names)) != len(names):
            raise TopologyError("duplicate edge names")
        all_nodes = set(self.nodes) | set(self.fixed_nodes)
        if len(all_nodes) != len(self.nodes) + len(self.fixed_nodes):
            raise TopologyError("a node is declared both free and fixed")
        for e in self.edges:
            if e.kind not in EDGE_KINDS:
                raise TopologyError(f"{e.name}: unknown kind {e.kind!r}")
            if e.src not in all_nodes or e.dst not in all_nodes:
                raise TopologyError(f"{e.name}: endpoint not declared")
            if e.kind == "pump":
                if e.src not in self.fixed_nodes:
                    raise TopologyError(f"{e.name}: pump must draw from a fixed node")
                if e.gain <= 0 or e.slip < 0:
                    raise TopologyError(f"{e.name}: pump gain must be > 0, slip >= 0")
            elif e.conductance <= 0:
                raise TopologyError(f"{e.name}: conductance must be > 0")
            if e.kind == "leak":
                if e.dst not in self.fixed_nodes or self.fixed_nodes[e.dst] != 0.0:
                    raise TopologyError(f"{e.name}: leak must end at an ambient node")
                if e.fault is None:
                    raise TopologyError(f"{e.name}: leak without fault binding")
            if e.kind == "engine" and e.dst not in self.fixed_nodes:
                raise TopologyError(f"{e.name}: engine must discharge to a fixed sink")
            if e.kind in ("valve", "pump") and e.control is None:
                raise TopologyError(f"{e.name}: missing control binding")
        edges = self.edge_map
        for out, edge in self.flow_sensors.items():
            if edge not in edges:
                raise TopologyError(f"{out}: unknown edge {edge}")
        for out, node in self.pressure_sensors.items():
            if node not in all_nodes:
                raise TopologyError(f"{out}: unknown node {node}")
        for fault, valve in self.stuck_faults.items():
            if valve not in edges or edges[valve].kind != "valve":
                raise TopologyError(f"{fault}: {valve} is not a valve")

    def swap_lines(self) -> dict[str, str]:
        """Name permutation mirroring line 1 onto line 2 (for symmetry checks)."""
        perm = {"reference_1": "reference_2", "reference_2": "reference_1"}
        for a, b in ((6, 7), (9, 10), (11, 12), (13, 14), (8, 8), (15, 15), (16, 16)):
            perm[f"control_valve_{a}"] = f"control_valve_{b}"
            perm[f"control_valve_{b}"] = f"control_valve_{a}"
            perm[f"stuckAt_valve_{a}"] = f"stuckAt_valve_{b}"
            perm[f"stuckAt_valve_{b}"] = f"stuckAt_valve_{a}"
        for a, b in ((1, 2), (3, 4), (5, 6), (7, 8)):
            perm[f"massFlow_{a}"] = f"massFlow_{b}"
            perm[f"massFlow_{b}"] = f"massFlow_{a}"
            perm[f"leak_fault_{a}"] = f"leak_fault_{b}"
            perm[f"leak_fault_{b}"] = f"leak_fault_{a}"
        for a, b in ((3, 4), (5, 6), (7, 8)):
            perm[f"pressure_{a}"] = f"pressure_{b}"
            perm[f"pressure_{b}"] = f"pressure_{a}"
        return perm

    def without_leaks(self) -> "NetworkTopology":
        return NetworkTopology(
            nodes=list(self.nodes),
            fixed_nodes=dict(self.fixed_nodes),
            edges=[e for e in self.edges if e.kind != "leak"],
            flow_sensors=dict(self.flow_sensors),
            pressure_sensors=dict(self.pressure_sensors),
            stuck_faults=dict(self.stuck_faults),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkTopology":
        try:
            edges = [Edge(**e) for e in data["edges"]]
            return cls(
                nodes=list(data["nodes"]),
                fixed_nodes={k: float(v) for k, v in data["fixed_nodes"].items()},
                edges=edges,
                flow_sensors=dict(data["flow_sensors"]),
                pressure_sensors=dict(data["pressure_sensors"]),
                stuck_faults=dict(data.get("stuck_faults", {})),
                subsystems=list(data.get("subsystems", [])),
            )
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed topology config: {exc}") from exc


def load_topology(path: str | Path | None = None) -> NetworkTopology:
    """Load a topology from YAML; the bundled fuel system when ``path`` is None."""
    if path is None:
        text = resources.files("fuelres.data").joinpath("fuel_system.yaml").read_text()
    else:
        text = Path(path).read_text()
    return NetworkTopology.from_dict(yaml.safe_load(text))
