import csv
import math

import numpy as np
import pytest

from trajplan.env import inflate, segment_free
from trajplan.errors import InvalidArgumentError, PlannerFailureError
from trajplan.sampler import (
    Path,
    PlannerParams,
    dump_tree_csv,
    informed_sample,
    plan_path,
    refine,
    rejoin_path,
    rewire_radius,
    rotation_to_world,
)

PARAMS = PlannerParams(rounds=3, iters_per_round=1500, steer_step=0.5)


@pytest.mark.parametrize(
    "direction", [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.3, -2.0, 0.5], [0.0, 1.0], [-2.0, -1.0]]
)
def test_rotation_to_world_maps_first_axis(direction):
    rot = rotation_to_world(direction)
    unit = np.asarray(direction) / np.linalg.norm(direction)
    np.testing.assert_allclose(rot[:, 0], unit, atol=1e-12)
    np.testing.assert_allclose(rot.T @ rot, np.eye(unit.size), atol=1e-12)
    assert np.linalg.det(rot) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        rotation_to_world(np.zeros(unit.size))


def test_rewire_radius_shrinks_and_clamps():
    r_small = rewire_radius(10, 3, gamma=5.0)
    r_large = rewire_radius(10_000, 3, gamma=5.0)
    assert r_large < r_small
    assert rewire_radius(10, 3, gamma=50.0, max_step=0.5) == 0.5
    with pytest.raises(InvalidArgumentError):
        rewire_radius(1, 3, gamma=5.0)
    with pytest.raises(InvalidArgumentError):
        rewire_radius(10, 3, gamma=0.0)


def test_informed_samples_lie_in_ellipse(rng):
    start = np.array([0.0, 0.0, 0.0])
    goal = np.array([3.0, 1.0, -1.0])
    c_best = 1.3 * np.linalg.norm(goal - start)
    samples = np.array([informed_sample(start, goal, c_best, rng) for _ in range(2000)])
    focal = np.linalg.norm(samples - start, axis=1) + np.linalg.norm(samples - goal, axis=1)
    assert np.all(focal <= c_best + 1e-9)
    # samples fill the ellipse rather than collapsing onto its axis
    assert focal.max() > 0.95 * c_best


def test_informed_sample_uniform_and_errors(rng):
    lower, upper = np.zeros(3), np.array([1.0, 2.0, 3.0])
    samples = np.array(
        [informed_sample(lower, upper, math.inf, rng, lower, upper) for _ in range(500)]
    )
    assert np.all(samples >= lower) and np.all(samples <= upper)
    with pytest.raises(InvalidArgumentError):
        informed_sample(lower, upper, math.inf, rng)
    with pytest.raises(InvalidArgumentError):
        informed_sample(lower, upper, 1.0, rng)


def test_line_of_sight_gives_single_segment(open_env):
    path = plan_path(open_env, [0.5, 0.5, 1.0], [3.5, 3.0, 1.0], seed=0, params=PARAMS)
    assert path.segments == 1
    np.testing.assert_allclose(path.end, [3.5, 3.0, 1.0])
    assert path.cost == pytest.approx(np.hypot(3.0, 2.5))


def test_path_around_pillar(pillar_env):
    env = inflate(pillar_env, 0.1)
    start, goal = np.array([0.5, 2.0, 1.0]), np.array([3.5, 2.0, 1.0])
    path = plan_path(env, start, goal, seed=3, params=PARAMS)

    np.testing.assert_allclose(path.start, start)
    assert np.linalg.norm(path.end - goal) <= PARAMS.goal_radius
    assert path.min_clearance > 0.0
    for a, b in zip(path.nodes[:-1], path.nodes[1:]):
        assert segment_free(env, a, b)
    assert 3.0 < path.cost < 4.0

    tree = path.tree
    np.testing.assert_allclose(tree.recomputed_costs(), tree.cost, atol=1e-9)


def test_planning_is_deterministic_per_seed(pillar_env):
    env = inflate(pillar_env, 0.1)
    first = plan_path(env, [0.5, 2.0, 1.0], [3.5, 2.0, 1.0], seed=11, params=PARAMS)
    second = plan_path(env, [0.5, 2.0, 1.0], [3.5, 2.0, 1.0], seed=11, params=PARAMS)
    np.testing.assert_array_equal(first.nodes, second.nodes)


def test_blocked_endpoints_fail_in_sampling_stage(pillar_env):
    env = inflate(pillar_env, 0.1)
    with pytest.raises(PlannerFailureError) as excinfo:
        plan_path(env, [2.0, 2.0, 1.0], [3.5, 2.0, 1.0], seed=0, params=PARAMS)
    assert excinfo.value.stage == "sampling"
    with pytest.raises(PlannerFailureError):
        plan_path(env, [0.5, 2.0, 1.0], [2.1, 2.0, 1.0], seed=0, params=PARAMS)


def test_refine_never_increases_cost(pillar_env):
    env = inflate(pillar_env, 0.1)
    path = plan_path(env, [0.5, 2.0, 1.0], [3.5, 2.0, 1.0], seed=5, params=PARAMS)
    cost = path.cost
    for _ in range(3):
        path = refine(path.tree, path, 200)
        assert path.cost <= cost + 1e-12
        cost = path.cost
    assert refine(path.tree, path, 0) is path


def test_dump_tree_csv(tmp_path, pillar_env):
    env = inflate(pillar_env, 0.1)
    path = plan_path(env, [0.5, 2.0, 1.0], [3.5, 2.0, 1.0], seed=2, params=PARAMS)
    out = tmp_path / "tree.csv"
    dump_tree_csv(path.tree, out)
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["node", "parent", "cost", "x0", "x1", "x2"]
    assert len(rows) == path.tree.size + 1
    assert rows[1][1] == "-1"


def test_plan_path_explicit_budgets(open_env):
    path = plan_path(open_env, [0.5, 0.5, 1.0], [2.0, 0.5, 1.0], rounds=1, iters_per_round=50)
    assert path.cost == pytest.approx(1.5)
    with pytest.raises(InvalidArgumentError, match="rounds"):
        plan_path(open_env, [0.5, 0.5, 1.0], [2.0, 0.5, 1.0], rounds=1, params=PARAMS)
    with pytest.raises(InvalidArgumentError, match="goal_radius"):
        plan_path(open_env, [0.5, 0.5, 1.0], [2.0, 0.5, 1.0], goal_radius=0.1, params=PARAMS)


def test_rejoin_path_enters_furthest_visible_node(pillar_env):
    env = inflate(pillar_env, 0.1)
    goal = [3.5, 2.0, 1.0]
    guide = Path.from_nodes(env, [[0.5, 2.0, 1.0], [2.0, 2.6, 1.0], goal])
    assert guide.min_clearance > 0.0

    around = rejoin_path(env, [1.0, 2.2, 1.0], goal, guide, goal_radius=0.005)
    np.testing.assert_array_equal(around.nodes, [[1.0, 2.2, 1.0], [2.0, 2.6, 1.0], goal])
    assert around.min_clearance > 0.0

    past = rejoin_path(env, [3.0, 2.3, 1.0], goal, guide, goal_radius=0.005)
    np.testing.assert_array_equal(past.nodes, [[3.0, 2.3, 1.0], goal])

    assert rejoin_path(env, [1.0, 2.2, 1.0], [3.5, 3.0, 1.0], guide, goal_radius=0.005) is None


def test_rejoin_path_rejects_blocked_remainder(pillar_env):
    env = inflate(pillar_env, 0.1)
    through = Path.from_nodes(env, [[0.5, 2.0, 1.0], [3.5, 2.0, 1.0]])
    assert rejoin_path(env, [0.5, 2.0, 1.0], [3.5, 2.0, 1.0], through, goal_radius=0.005) is None
