import json

import pytest

from fuelres import cli
from fuelres.twin import FaultVector, InputVector, NoiseModel, simulate_horizon


def test_plan_cli(tmp_path, capsys):
    prob = tmp_path / "p.yaml"
    prob.write_text("dt: 300\nfaults: {leak_fault_5: 0.4}\nheuristic: plus\nsearch: {seconds: 60}\n")
    out = tmp_path / "best.plan"
    assert cli.plan_main(["--problem", str(prob), "--out", str(out), "--stats", str(tmp_path / "s.json")]) == 0
    assert out.read_text() == capsys.readouterr().out
    stats = json.loads((tmp_path / "s.json").read_text())
    assert 0 < stats["R"] <= 1 and stats["exhausted"] is False


def test_plan_cli_unrepairable(tmp_path, capsys):
    prob = tmp_path / "p.yaml"
    prob.write_text("dt: 300\nfaults: {leak_fault_7: 0.25}\n")
    assert cli.plan_main(["--problem", str(prob)]) == 3
    assert "X" in capsys.readouterr().err


def test_plan_cli_bad_config(tmp_path, capsys):
    prob = tmp_path / "p.yaml"
    prob.write_text("dt: 70\n")
    assert cli.plan_main(["--problem", str(prob)]) == 2


def test_diagnose_cli(tmp_path, capsys):
    w = simulate_horizon(None, [InputVector.nominal()] * 10, [FaultVector.single(7, 0.5)] * 10,
                         NoiseModel.default())
    w.to_csv(tmp_path / "w.csv")
    assert cli.diagnose_main(["--window", str(tmp_path / "w.csv"), "--csv", str(tmp_path / "d.csv")]) == 0
    rep = json.loads(capsys.readouterr().out)
    best = max(rep["faults"], key=lambda r: r["probability"])
    assert best["fault"] == 7
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    assert cli.diagnose_main(["--window", str(tmp_path / "bad.csv")]) == 2


def test_train_surrogate_cli(tmp_path, capsys):
    out = tmp_path / "s.bin"
    assert cli.train_surrogate_main(["--samples", "500", "--epochs", "2", "--hidden", "8", "--out", str(out)]) == 0
    assert out.exists() and json.loads((tmp_path / "s.json").read_text())["epochs"] == 2


def test_run_scenario_cli(tmp_path, capsys):
    assert cli.run_scenario_main(["--scenario", "1", "--fault", "3", "--profile", "exp", "--dt", "20",
                                  "--seed", "0", "--out", str(tmp_path)]) == 0
    assert "status score" in capsys.readouterr().out
    assert (tmp_path / "traces" / "s1_f3_exp_dt20_seed0.csv").exists()
    with pytest.raises(SystemExit):
        cli.run_scenario_main(["--scenario", "4", "--fault", "3", "--out", str(tmp_path)])


def test_run_campaign_cli(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"scenarios: [1]\nfaults: [3, 4]\nprofiles: [linear]\ndts: [100]\nout: {tmp_path / 'out'}\n")
    assert cli.run_campaign_main(["--config", str(cfg)]) == 0
    assert "scenario 1 linear" in capsys.readouterr().out
    assert (tmp_path / "out" / "averages.csv").exists()
