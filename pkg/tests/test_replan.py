import json

import numpy as np
import pytest

from trajplan import pipeline, replan
from trajplan.corridor import State
from trajplan.env import Box, Environment, Workspace
from trajplan.replan import (
    CommittedPiece,
    braking_trajectory,
    run,
    should_replan,
    splice_gaps,
    trajectory_blocked,
    write_run_log,
)
from trajplan.scenario import Scenario, ScenarioEvent, StateSpec
from trajplan.trajectory import Trajectory

ROOM = {"lower": [0.0, 0.0, 0.0], "upper": [4.0, 4.0, 2.0]}


def _straight_piece() -> CommittedPiece:
    # 1 m/s along x from (0.5, 2, 1) for 2 s
    start = State([0.5, 2.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    traj = Trajectory(start, np.zeros((20, 3)), 0.1)
    return CommittedPiece(0, 0, "initial", 0.0, traj.t_f, traj)


def _room(*obstacles) -> Environment:
    return Environment(Workspace(ROOM["lower"], ROOM["upper"]), obstacles)


def test_goal_change_always_triggers():
    event = ScenarioEvent(time=0.5, kind="goal-change", goal=StateSpec(p=[3.0, 3.0, 1.0]))
    decision = should_replan(0.5, [event], _room(), _straight_piece())
    assert decision.replan and decision.reason == "goal-change"
    assert not should_replan(0.4, [event], _room(), _straight_piece()).replan


def test_obstacle_update_triggers_only_when_blocking():
    event = ScenarioEvent(
        time=0.5,
        kind="obstacle-update",
        add=[{"type": "box", "lower": [0, 0, 0], "upper": [1, 1, 1]}],
    )
    ahead = _room(Box((1.9, 1.8, 0.8), (2.1, 2.2, 1.2)))
    behind = _room(Box((0.4, 1.8, 0.8), (0.6, 2.2, 1.2)))
    aside = _room(Box((1.9, 2.3, 0.8), (2.1, 2.6, 1.2)))
    piece = _straight_piece()
    assert should_replan(1.0, [event], ahead, piece) == (True, "blocked")
    assert not should_replan(1.0, [event], behind, piece).replan
    assert not should_replan(1.0, [event], aside, piece).replan
    # the robot radius widens the check
    assert should_replan(1.0, [event], aside, piece, robot_radius=0.4).replan


def test_trajectory_blocked_ignores_the_past():
    piece = _straight_piece()
    env = _room(Box((0.9, 1.8, 0.8), (1.1, 2.2, 1.2)))
    assert trajectory_blocked(env, piece.trajectory, 0.0)
    assert not trajectory_blocked(env, piece.trajectory, 1.0)


@pytest.mark.parametrize("speed", [0.5, 1.0, 5.0])
def test_braking_trajectory_stops_within_limits(speed):
    state = State([1.0, 1.0, 1.0], [speed, -0.5 * speed, 0.0], [3.0, 0.0, 0.0])
    stop = braking_trajectory(state, a_max=20.0, h=0.1)
    np.testing.assert_allclose(stop.velocities[-1], 0.0, atol=1e-12)
    assert np.abs(stop.accels).max() <= 20.0 + 1e-9
    np.testing.assert_allclose(stop.positions[0], state.p)
    np.testing.assert_allclose(stop.velocities[0], state.v)


def _scenario(**extra) -> Scenario:
    data = {
        "name": "open-room",
        "workspace": ROOM,
        "start": {"p": [0.5, 0.5, 1.0]},
        "goal": {"p": [2.0, 0.5, 1.0]},
    }
    data.update(extra)
    return Scenario(**data)


def test_run_without_events_reaches_goal(settings, tmp_path):
    log = run(_scenario(), settings, seed=0)
    assert log.outcome == "reached"
    assert log.goals_reached == 1
    assert len(log.pieces) == 1
    assert [d.reason for d in log.decisions] == ["initial"]
    np.testing.assert_allclose(log.final_state().p, [2.0, 0.5, 1.0], atol=1e-6)
    assert log.final_time == pytest.approx(log.pieces[0].t_end)

    out = write_run_log(log, tmp_path / "run", dt=0.05)
    data = json.loads((out / "run_log.json").read_text(encoding="utf-8"))
    assert data["outcome"] == "reached"
    assert (out / "leg_0.csv").exists()


def test_run_with_tasks_plans_each_leg(settings):
    log = run(_scenario(tasks=[{"p": [2.0, 1.5, 1.0]}]), settings, seed=0)
    assert log.outcome == "reached"
    assert log.goals_reached == 2
    assert [p.reason for p in log.pieces] == ["initial", "task"]
    assert log.pieces[1].t_start == pytest.approx(log.pieces[0].t_end)
    np.testing.assert_allclose(log.final_state().p, [2.0, 1.5, 1.0], atol=1e-6)


def test_runs_are_deterministic(settings):
    first = run(_scenario(), settings, seed=9)
    second = run(_scenario(), settings, seed=9)
    np.testing.assert_array_equal(
        first.pieces[0].trajectory.accels, second.pieces[0].trajectory.accels
    )


@pytest.mark.slow
def test_goal_change_splices_continuously(settings):
    scenario = _scenario(
        goal={"p": [3.5, 0.5, 1.0]},
        events=[{"time": 0.5, "kind": "goal-change", "goal": {"p": [3.0, 2.5, 1.0]}}],
    )
    log = run(scenario, settings, seed=1)
    assert log.outcome == "reached", log.message
    assert [p.reason for p in log.pieces] == ["initial", "goal-change"]

    gaps = splice_gaps(log)
    assert len(gaps) == 1
    assert gaps[0].position < 1e-9
    assert gaps[0].velocity < 1e-9
    assert gaps[0].acceleration < 1e-9
    # the splice lies on the step grid at least one commit horizon ahead
    h = log.pieces[0].trajectory.h
    assert gaps[0].time >= 0.5 + settings.commit_horizon - 1e-9
    assert gaps[0].time / h == pytest.approx(round(gaps[0].time / h))
    np.testing.assert_allclose(log.final_state().p, [3.0, 2.5, 1.0], atol=1e-6)


@pytest.mark.slow
def test_blocking_obstacle_forces_a_replan(settings):
    scenario = _scenario(
        start={"p": [0.5, 2.0, 1.0]},
        goal={"p": [3.5, 2.0, 1.0]},
        events=[
            {
                "time": 0.5,
                "kind": "obstacle-update",
                "add": [{"type": "box", "lower": [2.4, 1.7, 0.0], "upper": [2.6, 2.3, 2.0]}],
            }
        ],
    )
    log = run(scenario, settings, seed=2)
    assert "blocked" in [d.reason for d in log.decisions]
    assert log.pieces[-1].reason in ("blocked", "emergency-stop")
    final = log.final_state()
    assert not (2.4 <= final.p[0] <= 2.6 and 1.7 <= final.p[1] <= 2.3)
    if log.outcome == "reached":
        np.testing.assert_allclose(final.p, [3.5, 2.0, 1.0], atol=1e-6)


def test_refined_path_resolves_the_remainder(settings, monkeypatch):
    sampled = []
    sample_path = pipeline.plan_path
    monkeypatch.setattr(
        pipeline, "plan_path", lambda *a, **k: sampled.append(a) or sample_path(*a, **k)
    )
    # any refinement that does not lengthen the path re-solves the remainder
    eager = settings.model_copy(update={"refine_resolve_gain": 0.0})
    log = run(_scenario(), eager, seed=0)

    assert log.outcome == "reached", log.message
    assert log.refinements
    assert "refined" in [p.reason for p in log.pieces]
    assert len(sampled) == 1
    for gap in splice_gaps(log):
        assert gap.position < 1e-9
        assert gap.velocity < 1e-9
        assert gap.acceleration < 1e-9
    np.testing.assert_allclose(log.final_state().p, [2.0, 0.5, 1.0], atol=1e-6)


def test_refinement_alone_keeps_the_plan(settings):
    assert settings.refine_resolve_gain is None
    log = run(_scenario(), settings, seed=0)
    assert log.refinements
    assert [p.reason for p in log.pieces] == ["initial"]


@pytest.mark.slow
def test_blocked_replan_receives_the_refined_path(settings, monkeypatch):
    guides = []
    plan = replan.plan_trajectory

    def recorded(*args, **kwargs):
        guides.append(kwargs.get("guide"))
        return plan(*args, **kwargs)

    monkeypatch.setattr(replan, "plan_trajectory", recorded)
    scenario = _scenario(
        start={"p": [0.5, 2.0, 1.0]},
        goal={"p": [3.5, 2.0, 1.0]},
        events=[
            {
                "time": 0.5,
                "kind": "obstacle-update",
                "add": [{"type": "box", "lower": [2.4, 1.7, 0.0], "upper": [2.6, 2.3, 2.0]}],
            }
        ],
    )
    log = run(scenario, settings, seed=2)
    reasons = [d.reason for d in log.decisions]
    assert reasons[:2] == ["initial", "blocked"]
    assert guides[0] is None
    refined = guides[1]
    assert refined is not None
    assert refined.tree is log.pieces[0].path.tree
    np.testing.assert_allclose(refined.end, [3.5, 2.0, 1.0])
