import csv
import math

import numpy as np
import pytest

from trajplan.corridor import State, build_waypoints, plan_from_waypoints, witness_discrete
from trajplan.env import Box, Environment, Workspace
from trajplan.errors import InvalidArgumentError
from trajplan.trajectory import (
    Trajectory,
    export_csv,
    integrate,
    sample,
    separation,
    time_series,
    verify,
)

PATH = np.array([[0.5, 0.5, 1.0], [1.3, 0.5, 1.0], [1.3, 1.1, 1.4]])


@pytest.fixture
def witness_case(open_env):
    plan = build_waypoints(PATH, 0.05, 20.0)
    states = witness_discrete(plan, State.at_rest(plan.waypoints[0]))
    accels = np.array([s.a for s in states])
    traj = Trajectory.from_solution(State.at_rest(plan.waypoints[0]), accels, plan.h)
    return plan, traj, open_env


def test_integrate_constant_acceleration():
    start = State([0.0, 1.0], [1.0, 0.0], [0.0, 0.0])
    states = integrate(start, np.tile([0.5, -1.0], (4, 1)), 0.25)
    t = 4 * 0.25
    np.testing.assert_allclose(states[-1].p, [t + 0.25 * t * t, 1.0 - 0.5 * t * t])
    np.testing.assert_allclose(states[-1].v, [1.0 + 0.5 * t, -t])
    np.testing.assert_array_equal(states[-1].a, [0.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        integrate(start, [[np.nan, 0.0]], 0.25)


def test_sample_is_continuous_across_knots(rng):
    traj = Trajectory(State.at_rest([0.0, 0.0, 0.0]), rng.uniform(-1, 1, (6, 3)), 0.2)
    for k in range(1, traj.K):
        before = sample(traj, k * 0.2 - 1e-9)
        after = sample(traj, k * 0.2 + 1e-9)
        np.testing.assert_allclose(before.p, after.p, atol=1e-8)
        np.testing.assert_allclose(before.v, after.v, atol=1e-8)
        at_knot = sample(traj, k * 0.2)
        np.testing.assert_allclose(at_knot.p, traj.positions[k], atol=1e-12)
        np.testing.assert_allclose(at_knot.a, traj.accels[k])
    with pytest.raises(InvalidArgumentError):
        sample(traj, traj.t_f + 1.0)


def test_final_sample_carries_final_acceleration():
    traj = Trajectory(State.at_rest([0.0]), [[1.0], [-1.0]], 0.5, a_final=[0.25])
    end = sample(traj, traj.t_f)
    np.testing.assert_allclose(end.p, traj.positions[-1])
    np.testing.assert_allclose(end.a, [0.25])


def test_separation_from_polyline():
    traj = Trajectory(State.at_rest([0.0, 0.3]), np.zeros((2, 2)), 0.5)
    assert separation(traj, [[-1.0, 0.0], [1.0, 0.0]], 0.5) == pytest.approx(0.3)


def test_extremal_step_deviation_reaches_three_halves_ell():
    ell, a_max = 0.05, 20.0
    v_max, h = math.sqrt(ell * a_max), 2.0 * math.sqrt(ell / a_max)
    # leave one region edge at full speed away from the path, then brake at A_max
    start = State([ell, 0.0], [v_max, 0.0], [0.0, 0.0])
    traj = Trajectory(start, [[-a_max, 0.0]], h)
    assert sample(traj, h / 2).p[0] == pytest.approx(1.5 * ell)
    assert separation(traj, [[0.0, -1.0], [0.0, 1.0]], h / 2) == pytest.approx(1.5 * ell)


def test_verify_passes_on_witness(witness_case):
    plan, traj, env = witness_case
    report = verify(traj, PATH, plan, env)
    assert report.passed, report.failures
    assert report.max_separation <= report.separation_bound
    assert report.analytic_separation <= report.separation_bound + 1e-12
    assert report.separation_bound == pytest.approx(1.5 * 0.05 * math.sqrt(3))
    assert report.corner_steps
    assert not report.uncertified_steps
    assert report.dt == pytest.approx(plan.h / 50)


def test_verify_clamps_coarse_sampling(witness_case):
    plan, traj, env = witness_case
    report = verify(traj, PATH, plan, env, dt=plan.h)
    assert report.dt == pytest.approx(plan.h / 20)


def test_verify_detects_limit_violations(witness_case):
    plan, traj, env = witness_case
    fast = Trajectory(traj.x_start, 3.0 * traj.accels, traj.h, traj.a_final)
    report = verify(fast, PATH, plan, env)
    assert not report.passed
    assert report.acceleration_violation > 0.0
    assert any("acceleration" in f for f in report.failures)


def test_verify_detects_collision(witness_case):
    plan, traj, _ = witness_case
    blocked = Environment(
        Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 2.0)),
        (Box((0.85, 0.4, 0.9), (0.95, 0.6, 1.1)),),
    )
    report = verify(traj, PATH, plan, blocked)
    assert report.collision
    assert not report.passed
    assert report.uncertified_steps
    assert report.colliding_steps


def _cruise(start, velocity, steps):
    # ℓ = 0.05, A_max = 20 give h = 0.1 and V_max = 1, so each step advances v·h
    traj = Trajectory(State(start, velocity, [0.0, 0.0, 0.0]), np.zeros((steps, 3)), 0.1)
    plan = plan_from_waypoints(traj.positions, 0.05, 20.0)
    return traj, plan


def test_verify_fails_thin_wall_between_samples():
    traj, plan = _cruise([0.0, 1.0, 1.0], [1.0, 0.0, 0.0], 10)
    wall = Environment(
        Workspace((-1.0, 0.0, 0.0), (2.0, 2.0, 2.0)),
        (Box((0.7005, 0.0, 0.0), (0.7015, 2.0, 2.0)),),
    )
    # samples every 2 mm land on either side of the 1 mm wall
    report = verify(traj, plan.waypoints[[0, -1]], plan, wall, dt=0.002)
    assert report.samples > 0
    assert not report.passed
    assert report.collision
    assert report.colliding_steps == [7]
    assert any("not certified" in f for f in report.failures)


def test_verify_halving_clears_box_near_diagonal_arc():
    traj, plan = _cruise([0.5, 0.5, 1.0], [1.0, 1.0, 0.0], 4)
    # the obstacle sits inside the first step's bounding square but away from its diagonal
    near = Environment(
        Workspace((0.0, 0.0, 0.0), (2.0, 2.0, 2.0)),
        (Box((0.58, 0.50, 0.0), (0.60, 0.52, 2.0)),),
    )
    report = verify(traj, plan.waypoints[[0, -1]], plan, near)
    assert report.uncertified_steps == [0]
    assert report.colliding_steps == []
    assert not report.collision
    assert report.passed, report.failures


def test_time_series_and_csv_export(tmp_path, witness_case):
    _, traj, _ = witness_case
    times, p, v, a = time_series(traj, 0.05)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(traj.t_f)
    assert p.shape == (times.size, 3)
    np.testing.assert_allclose(p[-1], traj.positions[-1])
    with pytest.raises(InvalidArgumentError):
        time_series(traj, 0.0)

    out = export_csv(traj, tmp_path / "traj.csv", dt=0.05, t0=2.0, duration=0.5)
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["t", "p0", "p1", "p2", "v0", "v1", "v2", "a0", "a1", "a2"]
    assert float(rows[1][0]) == pytest.approx(2.0)
    assert float(rows[-1][0]) == pytest.approx(2.5)
