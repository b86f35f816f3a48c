"""Campaigns over scenario cells and report emission."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .metric import ResilienceParams, write_timeseries
from .scenario import STATUS_SCORE, CellResult, ScenarioConfig, run_scenario

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "fault", "profile", "dt", "seed", "status", "J1", "J2", "R", "actions")
RUNTIME_COLUMNS = ("scenario", "fault", "profile", "dt", "seed", "runtime_s", "planning_s", "searches",
                   "replans", "diag_latency_mean", "diag_latency_max")


@dataclass
class CellRecord:
    """Serializable summary of one cell (no trace)."""

    scenario: int
    fault: int
    profile: str
    dt: float
    seed: int
    status: str
    J1: float | None = None
    J2: float | None = None
    R: float | None = None
    runtime_s: float = 0.0
    planning_s: float = 0.0
    searches: int = 0
    replans: int = 0
    diag_latency_mean: float | None = None
    diag_latency_max: float | None = None
    actions: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def key(self) -> tuple:
        return (self.scenario, self.fault, self.profile, self.dt, self.seed)

    @classmethod
    def from_result(cls, r: CellResult) -> "CellRecord":
        c = r.config
        lat = r.diag_latency
        return cls(c.scenario, c.fault, c.profile, float(c.dt), c.seed, r.status, r.J1, r.J2, r.R,
                   r.runtime_s, r.planning_s, r.searches, r.replans,
                   float(np.mean(lat)) if lat else None, float(np.max(lat)) if lat else None,
                   list(r.actions), r.error)


@dataclass
class CampaignReport:
    cells: list[CellRecord]
    params: dict = field(default_factory=lambda: asdict(ResilienceParams()))

    def averages(self) -> list[dict]:
        """Mean ``R`` over the scored faults of each (scenario, profile, dt, seed) row."""
        rows: dict[tuple, list[CellRecord]] = {}
        for c in self.cells:
            rows.setdefault((c.scenario, c.profile, c.dt, c.seed), []).append(c)
        out = []
        for (s, p, dt, seed), cells in sorted(rows.items()):
            scored = [c.R for c in cells if c.status == STATUS_SCORE]
            out.append({"scenario": s, "profile": p, "dt": dt, "seed": seed,
                        "average_R": math.fsum(scored) / len(scored) if scored else None,
                        "scored": len(scored), "cells": len(cells)})
        return out

    def to_dict(self) -> dict:
        return {"params": self.params, "cells": [asdict(c) for c in self.cells], "averages": self.averages()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CampaignReport":
        d = json.loads(text)
        names = {f.name for f in fields(CellRecord)}
        cells = [CellRecord(**{k: v for k, v in c.items() if k in names}) for c in d["cells"]]
        params = d.get("params", {})
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
        return cls(cells, params)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(report: CampaignReport, path) -> None:
    """One row per cell; statuses X / - leave the metric columns empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in sorted(report.cells, key=lambda c: c.key):
            w.writerow([c.scenario, c.fault, c.profile, _fmt(float(c.dt)), c.seed, c.status,
                        _fmt(c.J1), _fmt(c.J2), _fmt(c.R), len(c.actions)])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_report(report: CampaignReport, out_dir, results: list[CellResult] | None = None) -> dict[str, Path]:
    """Write ``report.csv``, ``report.json``, ``runtimes.csv``, averages and per-cell files.

    Per-cell files (when ``results`` carry traces): ``traces/<cell>.csv`` with
    the scored flows, ``curves/<cell>.csv`` with cumulative fuel spent and
    delivered, and ``plans/<cell>.plan`` with the executed actions.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "report.csv", "json": out / "report.json", "runtimes": out / "runtimes.csv",
                 "averages": out / "averages.csv"}
        write_csv(report, paths["csv"])
        paths["json"].write_text(report.to_json())
        with open(paths["runtimes"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUNTIME_COLUMNS)
            for c in sorted(report.cells, key=lambda c: c.key):
                w.writerow([_fmt(getattr(c, k)) for k in RUNTIME_COLUMNS])
        with open(paths["averages"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "profile", "dt", "seed", "average_R", "scored", "cells"])
            for a in report.averages():
                w.writerow([_fmt(a[k]) for k in ("scenario", "profile", "dt", "seed", "average_R", "scored", "cells")])
        for r in results or []:
            if r.trace is None:
                continue
            label = r.config.label()
            for sub in ("traces", "curves", "plans"):
                (out / sub).mkdir(exist_ok=True)
            r.trace.to_csv(out / "traces" / f"{label}.csv")
            write_timeseries(r.trace, out / "curves" / f"{label}.csv")
            (out / "plans" / f"{label}.plan").write_text("".join(a + "\n" for a in r.actions))
    except OSError as exc:
        raise OSError(f"writing report under {out}: {exc}") from exc
    return paths


def _run_cell(cfg: ScenarioConfig) -> CellResult:
    try:
        return run_scenario(cfg)
    except Exception as exc:  # recorded in-cell, the campaign goes on
        log.error("cell %s failed: %s", cfg.label(), exc)
        return CellResult(cfg, "error", None, None, None, 0.0, 0.0, 0, 0, [],
                          error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def run_campaign(configs: list[ScenarioConfig], workers: int = 1, out_dir=None) -> tuple[CampaignReport, list[CellResult]]:
    """Run every cell (in worker processes when ``workers > 1``)."""
    if not configs:
        raise ValueError("campaign needs at least one cell")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, configs))
    else:
        results = []
        for cfg in configs:
            r = _run_cell(cfg)
            log.info("%s: %s R=%s (%.1f s)", cfg.label(), r.status, r.R, r.runtime_s)
            results.append(r)
    report = CampaignReport([CellRecord.from_result(r) for r in results], asdict(configs[0].params))
    if out_dir is not None:
        emit_report(report, out_dir, results)
    return report, results


_CAMPAIGN_KEYS = {"scenarios", "faults", "profiles", "dts", "seeds", "out", "workers", "cell"}


def campaign_from_dict(d: dict) -> tuple[list[ScenarioConfig], dict]:
    """Expand a campaign mapping into cells.

    Keys: ``scenarios``, ``faults``, ``profiles``, ``dts``, ``seeds`` (lists),
    ``cell`` (extra :class:`ScenarioConfig` fields), ``out``, ``workers``.
    """
    if not isinstance(d, dict):
        raise ValueError("campaign config must be a mapping")
    bad = set(d) - _CAMPAIGN_KEYS
    if bad:
        raise ValueError(f"unknown campaign keys: {sorted(bad)}")
    extra = dict(d.get("cell") or {})
    names = {f.name for f in fields(ScenarioConfig)} - {"scenario", "fault", "profile", "dt", "seed", "params"}
    if set(extra) - names:
        raise ValueError(f"unknown cell keys: {sorted(set(extra) - names)}")
    if "tank_capacity" in extra:
        extra["tank_capacity"] = tuple(extra["tank_capacity"])
    grid = itertools.product(d.get("scenarios", [1, 2, 3]), d.get("faults", list(range(1, 9))),
                             d.get("profiles", ["linear", "exp"]), d.get("dts", [20, 100]), d.get("seeds", [0]))
    cells = [ScenarioConfig(scenario=int(s), fault=int(f), profile=str(p), dt=float(dt), seed=int(seed), **extra)
             for s, f, p, dt, seed in grid]
    return cells, {"out": d.get("out"), "workers": int(d.get("workers", 1))}


def load_campaign(path) -> tuple[list[ScenarioConfig], dict]:
    return campaign_from_dict(yaml.safe_load(Path(path).read_text()))
