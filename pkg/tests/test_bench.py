import csv
import json
from pathlib import Path

import numpy as np
import pytest

from bench.acceptance import (
    all_passed,
    check_density_timing,
    check_ell_trends,
    check_feasibility,
    check_separation,
    evaluate_acceptance,
    load_acceptance,
    write_acceptance,
)
from bench.metrics import trajectory_length
from bench.properties import (
    coefficient_oracle,
    corner_turn_suite,
    extremal_step_check,
    straight_step_suite,
)
from bench.records import TrialRecord, load_records
from bench.reporting import COLUMNS, aggregate, emit, generate_summary, group_records
from bench.runner import density_sweep, ell_sweep, run_forest_sweep, trial_seed
from bench.scenes import maze_scenario, string_scene
from trajplan.corridor import State
from trajplan.errors import InvalidArgumentError
from trajplan.replan import run, splice_gaps
from trajplan.scenario import load_scenario
from trajplan.trajectory import Trajectory

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def _record(sweep="density", group=0, trial=0, value=1.0, found=True, **fields) -> TrialRecord:
    data = dict(
        sweep=sweep,
        group_index=group,
        trial_index=trial,
        seed=trial,
        density=value if sweep == "density" else None,
        ell=value if sweep == "ell" else 0.05,
        path_found=found,
        success=found,
        verified=found,
        qp_status="optimal" if found else None,
    )
    if found:
        data.update(
            path_length=10.0,
            max_velocity=1.0,
            max_separation=0.05,
            separation_bound=0.075,
            qp_variables=300,
            planning_time_s=0.1,
        )
    data.update(fields)
    return TrialRecord(**data)


def _density_records(times):
    return [
        _record(group=g, trial=t, value=0.5 * (g + 1), planning_time_s=time)
        for g, group_times in enumerate(times)
        for t, time in enumerate(group_times)
    ]


def _write_report(folder, records):
    folder.mkdir(parents=True, exist_ok=True)
    with open(folder / "report.jsonl", "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")


def test_group_value_follows_sweep():
    assert _record(value=2.0).group_value == 2.0
    assert _record(sweep="ell", value=0.1).group_value == 0.1


def test_aggregate_means_over_found_paths():
    members = [
        _record(trial=0, planning_time_s=0.1, path_length=8.0),
        _record(trial=1, planning_time_s=0.3, path_length=12.0),
        _record(trial=2, found=False, planning_time_s=5.0, error="sampling: no path"),
    ]
    [(sweep, value, grouped)] = group_records(members)
    stats = aggregate(sweep, value, grouped)
    assert stats["trials"] == 3
    assert stats["path_found_rate"] == pytest.approx(2 / 3)
    assert stats["success_rate"] == pytest.approx(2 / 3)
    assert stats["feasibility_rate"] == 1.0
    assert stats["mean_path_length"] == pytest.approx(10.0)
    assert stats["mean_planning_time_s"] == pytest.approx(0.2)
    assert stats["median_planning_time_s"] == pytest.approx(0.2)
    assert stats["max_separation"] == 0.05


def test_group_records_orders_groups_and_trials():
    records = [_record(group=1, trial=1, value=2.0), _record(group=0), _record(group=1, value=2.0)]
    groups = group_records(records)
    assert [(g[0], g[1]) for g in groups] == [("density", 1.0), ("density", 2.0)]
    assert [r.trial_index for r in groups[1][2]] == [0, 1]


def test_emit_csv_writes_trial_and_mean_rows(tmp_path):
    records = _density_records([[0.1, 0.2], [0.3]])
    out_file = emit(records, tmp_path, "csv")
    with open(out_file, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [r["row_type"] for r in rows] == ["trial", "trial", "mean", "trial", "mean"]
    assert float(rows[2]["success"]) == 1.0
    assert float(rows[2]["planning_time_s"]) == pytest.approx(0.15)


def test_emit_empty_writes_header_only(tmp_path):
    out_file = emit([], tmp_path, "csv")
    lines = out_file.read_text(encoding="utf-8").splitlines()
    assert lines == [",".join(COLUMNS)]


def test_emit_plot_data_and_unknown_format(tmp_path):
    out_file = emit(_density_records([[0.1], [0.2], [0.4]]), tmp_path, "plot-data")
    with open(out_file, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["value"]) for r in rows] == [0.5, 1.0, 1.5]
    with pytest.raises(ValueError):
        emit([], tmp_path, "parquet")


def test_generate_summary(tmp_path, settings):
    records = _density_records([[0.1, 0.2], [0.3]]) + [_record(group=2, value=1.5, found=False)]
    _write_report(tmp_path, records)
    summary, markdown = generate_summary(tmp_path, settings)
    assert summary["total_trials"] == 4
    assert summary["path_found"] == 3
    assert len(summary["groups"]) == 3
    assert len(summary["failures"]) == 1
    assert summary["slowest_trials"][0]["planning_time_s"] == pytest.approx(0.3)
    assert "## Failures" in markdown
    assert json.loads((tmp_path / "summary.json").read_text(encoding="utf-8")) == summary
    assert len(load_records(tmp_path / "report.jsonl")) == 4


def test_generate_summary_rejects_empty_run(tmp_path, settings):
    _write_report(tmp_path, [])
    with pytest.raises(ValueError):
        generate_summary(tmp_path, settings)


def test_feasibility_check():
    assert check_feasibility([_record()]).passed
    assert not check_feasibility([_record(found=False)]).passed
    mixed = [_record(), _record(trial=1, success=False, qp_status="max_iter")]
    check = check_feasibility(mixed)
    assert not check.passed
    assert check.value == 0.5


def test_separation_check():
    assert check_separation([_record()]).passed
    assert check_separation([_record(found=False)]).skipped
    over = _record(max_separation=0.075 + 1e-6, separation_bound=0.075)
    assert not check_separation([_record(), over]).passed


def test_density_timing_check():
    rising = _density_records([[0.1, 0.1], [0.2, 0.3], [0.5, 0.6], [0.9, 1.0]])
    check = check_density_timing(rising)
    assert check.passed
    assert check.value == pytest.approx(1.0)

    falling = _density_records([[1.0], [0.5], [0.2]])
    assert not check_density_timing(falling).passed

    short = check_density_timing(_density_records([[0.1], [0.2]]))
    assert short.skipped and short.passed


def test_ell_trend_checks():
    records = [
        _record(
            sweep="ell",
            group=g,
            value=ell,
            path_length=10.0 + g,
            max_velocity=0.5 * (g + 1),
            qp_variables=900 - 200 * g,
        )
        for g, ell in enumerate([0.02, 0.05, 0.1])
    ]
    checks = {c.name: c for c in check_ell_trends(records)}
    assert set(checks) == {"ell-path-length", "ell-max-velocity", "ell-qp-size"}
    assert all(c.passed for c in checks.values())

    records[0] = records[0].model_copy(update={"qp_variables": 100})
    assert not {c.name: c for c in check_ell_trends(records)}["ell-qp-size"].passed


def test_acceptance_round_trip(tmp_path):
    checks = evaluate_acceptance(_density_records([[0.1], [0.2], [0.3]]))
    assert [c.name for c in checks] == ["feasibility", "separation-bound", "density-timing"]
    assert all_passed(checks)
    write_acceptance(tmp_path, checks)
    assert load_acceptance(tmp_path) == checks
    with pytest.raises(FileNotFoundError):
        load_acceptance(tmp_path / "missing")


@pytest.mark.parametrize("suite", [straight_step_suite, corner_turn_suite])
def test_step_construction_suites(suite):
    result = suite(n=300, seed=5)
    assert result.passed, result
    assert result.cases == 300


@pytest.mark.slow
@pytest.mark.parametrize("suite", [straight_step_suite, corner_turn_suite])
def test_step_construction_suites_full(suite):
    result = suite(n=100_000, seed=0)
    assert result.passed, result
    assert result.cases == 100_000


def test_extremal_step_reaches_one_and_a_half_ell():
    result = extremal_step_check(ell=0.05, a_max=20.0)
    assert result.passed
    assert result.max_error < 1e-9


def test_coefficient_oracle():
    result = coefficient_oracle(max_k=8, trials=3)
    assert result.passed
    assert result.cases == 24


def test_trial_seed_is_deterministic_and_keyed():
    assert trial_seed(0, 1, 2) == trial_seed(0, 1, 2)
    assert len({trial_seed(0, g, t) for g in range(4) for t in range(4)}) == 16
    assert trial_seed(1, 0, 0) != trial_seed(0, 0, 0)


def test_trajectory_length_of_constant_velocity():
    start = State([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    traj = Trajectory(start, np.zeros((10, 3)), 0.1)
    assert trajectory_length(traj) == pytest.approx(1.0)


def test_scenes():
    assert len(string_scene(0).obstacles) == 200
    maze = maze_scenario()
    assert len(maze.environment().obstacles) == 4
    assert len(maze.goals()) == 6


def test_density_sweep_rejects_out_of_range(settings):
    with pytest.raises(InvalidArgumentError):
        density_sweep([5.0], 1, settings)


@pytest.mark.slow
def test_forest_sweep_writes_run_folder(settings):
    run_folder = run_forest_sweep(settings, densities=[0.1], trials=2, seed=3, workers=1)
    for name in [
        "config_snapshot.json",
        "metadata.json",
        "report.jsonl",
        "summary.json",
        "summary.md",
        "records.csv",
        "plot_data.csv",
        "acceptance.json",
    ]:
        assert (run_folder / name).exists(), name
    records = load_records(run_folder / "report.jsonl")
    assert len(records) == 2
    assert all(r.density == 0.1 for r in records)
    assert [c.name for c in load_acceptance(run_folder)][:2] == [
        "feasibility",
        "separation-bound",
    ]


@pytest.mark.slow
def test_ell_sweep_shares_queries_across_widths(settings):
    records = ell_sweep([0.03, 0.05], 1, settings, seed=1)
    assert [(r.group_index, r.trial_index) for r in records] == [(0, 0), (1, 0)]
    assert [r.ell for r in records] == [0.03, 0.05]
    assert records[0].seed == records[1].seed


@pytest.mark.slow
def test_dense_forest_trials_are_optimal_and_verified(settings):
    full = settings.model_copy(update={"rrt_rounds": 4, "rrt_iters_per_round": 2000})
    records = density_sweep([3.2], 5, full, seed=0)
    found = [r for r in records if r.path_found]
    assert found
    for r in found:
        assert r.qp_status == "optimal", r
        assert r.verified, r
        assert r.max_separation <= r.separation_bound


@pytest.mark.slow
def test_maze_visits_sequential_goals(settings):
    full = settings.model_copy(
        update={"rrt_rounds": 4, "rrt_iters_per_round": 2000, "refine_budget": 200}
    )
    log = run(load_scenario(SCENARIOS / "maze.json"), full)
    assert log.goals_reached >= 5, log.message
    planned = [p for p in log.pieces if p.report is not None]
    assert planned
    assert all(p.report.passed for p in planned)
    assert all(p.qp_status == "optimal" for p in planned)
    for gap in splice_gaps(log):
        assert gap.position < 1e-9
        assert gap.velocity < 1e-9
        assert gap.acceleration < 1e-9
