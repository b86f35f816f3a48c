"""Command-line entry points."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


def _logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def run_scenario_main(argv=None) -> int:
    from .harness.campaign import CampaignReport, CellRecord, emit_report
    from .harness.scenario import ScenarioConfig, run_scenario

    ap = argparse.ArgumentParser(prog="run-scenario", description="Run one closed-loop scenario cell.")
    ap.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    ap.add_argument("--fault", type=int, required=True, help="leak id 1..8 (0 = nominal)")
    ap.add_argument("--profile", choices=("linear", "exp"), default="linear")
    ap.add_argument("--dt", type=int, choices=(20, 50, 100), default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--heuristic", choices=("plus", "verbatim"), default="plus")
    ap.add_argument("--budget", type=float, default=600.0, help="planning seconds per cell")
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args(argv)
    _logging(a.verbose)
    try:
        cfg = ScenarioConfig(scenario=a.scenario, fault=a.fault, profile=a.profile, dt=a.dt, seed=a.seed,
                             heuristic=a.heuristic, plan_seconds=a.budget, cell_budget=a.budget)
    except ValueError as exc:
        ap.error(str(exc))
    r = run_scenario(cfg)
    emit_report(CampaignReport([CellRecord.from_result(r)], {}), a.out, [r])
    shown = "" if r.R is None else f" R={r.R:.6f}"
    print(f"{cfg.label()}: status {r.status}{shown} ({r.runtime_s:.1f} s)")
    return 0


def run_campaign_main(argv=None) -> int:
    from .harness.campaign import load_campaign, run_campaign

    ap = argparse.ArgumentParser(prog="run-campaign", description="Run a matrix of scenario cells.")
    ap.add_argument("--config", type=Path, required=True)
    ap.add_argument("--out", type=Path, help="overrides the config's out directory")
    ap.add_argument("--workers", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args(argv)
    _logging(a.verbose)
    cells, opts = load_campaign(a.config)
    out = a.out or opts["out"] or Path("campaign_out")
    report, _ = run_campaign(cells, workers=a.workers or opts["workers"], out_dir=out)
    for row in report.averages():
        avg = "n/a" if row["average_R"] is None else f"{row['average_R']:.4f}"
        print(f"scenario {row['scenario']} {row['profile']:6s} dt={row['dt']:g}: average R {avg} "
              f"({row['scored']}/{row['cells']} scored)")
    print(f"report written to {out}")
    return 0


def diagnose_main(argv=None) -> int:
    from .diagnosis.engine import diagnose
    from .twin.window import MeasurementWindow

    ap = argparse.ArgumentParser(prog="diagnose", description="Diagnose one measurement window CSV.")
    ap.add_argument("--window", type=Path, required=True)
    ap.add_argument("--json", type=Path, help="also write the report here")
    ap.add_argument("--csv", type=Path, help="per-fault table")
    ap.add_argument("--workers", type=int, default=4)
    a = ap.parse_args(argv)
    try:
        win = MeasurementWindow.from_csv(a.window)
    except (OSError, ValueError) as exc:
        print(f"diagnose: {exc}", file=sys.stderr)
        return 2
    d = diagnose(win, worker_budget=a.workers)
    print(d.to_json(a.json))
    if a.csv:
        d.to_csv(a.csv)
    return 0


def train_surrogate_main(argv=None) -> int:
    from .surrogate import generate_training_data, train_surrogate, write_training_report

    ap = argparse.ArgumentParser(prog="train-surrogate", description="Generate twin data and fit the surrogate.")
    ap.add_argument("--samples", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--out", type=Path, default=Path("surrogate.bin"))
    ap.add_argument("--report", type=Path, help="training report JSON (default: next to the checkpoint)")
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args(argv)
    _logging(a.verbose)
    data = generate_training_data(n=a.samples, seed=a.seed)
    model = train_surrogate(data, hidden=tuple(a.hidden), epochs=a.epochs, lr=a.lr, seed=a.seed, verbose=a.verbose)
    model.save(a.out)
    rep = a.report or a.out.with_suffix(".json")
    write_training_report(model, rep)
    print(f"held-out MSE (standardized) {model.val_mse_:.3e}; checkpoint {a.out}; report {rep}")
    return 0


def plan_main(argv=None) -> int:
    from .planner import FSTS, ConfigError, load_problem, plan

    ap = argparse.ArgumentParser(prog="plan", description="Plan a reconfiguration for a problem file.")
    ap.add_argument("--problem", type=Path, required=True)
    ap.add_argument("--out", type=Path, help="plan file (default: stdout only)")
    ap.add_argument("--stats", type=Path, help="search statistics JSON")
    a = ap.parse_args(argv)
    try:
        problem, budget, mode = load_problem(a.problem)
    except (OSError, ConfigError) as exc:
        print(f"plan: {exc}", file=sys.stderr)
        return 2
    res = plan(FSTS(problem), budget, mode=mode)
    if a.stats:
        stats = dict(res.stats, exhausted=res.exhausted, expired=res.expired)
        if res.best:
            stats.update({k: (v if not hasattr(v, "item") else v.item()) for k, v in res.best.metrics.items()})
        a.stats.write_text(json.dumps(stats, indent=2, default=float))
    if res.best is None:
        print("X (no plan exists)" if res.unrepairable else "- (no plan within budget)", file=sys.stderr)
        return 3 if res.unrepairable else 4
    text = res.best.to_text()
    sys.stdout.write(text)
    if a.out:
        res.best.write(a.out)
    return 0
