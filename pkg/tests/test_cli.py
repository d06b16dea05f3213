import json

import pytest
import yaml
from typer.testing import CliRunner

from bench.records import TrialRecord
from scripts import cli

runner = CliRunner()


@pytest.fixture(autouse=True)
def small_settings(monkeypatch, settings):
    monkeypatch.setattr(cli, "get_settings", lambda: settings)
    return settings


def _scenario_file(tmp_path):
    scenario = {
        "name": "cli-room",
        "workspace": {"lower": [0, 0, 0], "upper": [4, 4, 2]},
        "start": {"p": [0.5, 0.5, 1.0]},
        "goal": {"p": [1.5, 0.5, 1.0]},
        "seed": 3,
    }
    path = tmp_path / "room.yaml"
    path.write_text(yaml.safe_dump(scenario), encoding="utf-8")
    return path


def test_verify_passes():
    result = runner.invoke(cli.app, ["verify", "--cases", "50"])
    assert result.exit_code == 0, result.output
    assert "All checks passed" in result.output


def test_verify_missing_run_dir(tmp_path):
    result = runner.invoke(cli.app, ["verify", "--cases", "10", "--run-dir", str(tmp_path)])
    assert result.exit_code == 1


def test_verify_rechecks_run_acceptance(tmp_path):
    record = TrialRecord(
        sweep="density",
        group_index=0,
        trial_index=0,
        seed=0,
        density=0.5,
        ell=0.05,
        success=True,
        path_found=True,
        qp_status="optimal",
        verified=True,
        max_separation=0.05,
        separation_bound=0.075,
        planning_time_s=0.1,
    )
    (tmp_path / "report.jsonl").write_text(record.model_dump_json() + "\n", encoding="utf-8")
    result = runner.invoke(cli.app, ["verify", "--cases", "10", "--run-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "feasibility" in result.output


def test_run_scenario_writes_log(tmp_path):
    out_dir = tmp_path / "out"
    result = runner.invoke(
        cli.app,
        ["run-scenario", "--scenario", str(_scenario_file(tmp_path)), "--output-dir", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    data = json.loads((out_dir / "run_log.json").read_text(encoding="utf-8"))
    assert data["outcome"] == "reached"


def test_run_scenario_missing_file(tmp_path):
    result = runner.invoke(cli.app, ["run-scenario", "--scenario", str(tmp_path / "none.json")])
    assert result.exit_code == 1
    assert "Error" in result.output


def test_forest_sweep_rejects_bad_input():
    assert runner.invoke(cli.app, ["forest-sweep", "--densities", "a,b"]).exit_code == 1
    assert runner.invoke(cli.app, ["forest-sweep", "--ell", "-1"]).exit_code == 1
    assert runner.invoke(cli.app, ["forest-sweep", "--densities", "9.0"]).exit_code == 1
