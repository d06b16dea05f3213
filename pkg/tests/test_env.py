import numpy as np
import pytest

from trajplan.env import (
    Box,
    Cylinder,
    Environment,
    Sphere,
    Workspace,
    boxes_hit_obstacles,
    clearance,
    clearances,
    inflate,
    point_free,
    points_free,
    poisson_forest,
    segment_clearance,
    segment_free,
    with_obstacles,
)
from trajplan.errors import InvalidArgumentError


def _dense_segment_free(env, a, b, step=1e-4):
    n = int(np.ceil(np.linalg.norm(b - a) / step)) + 1
    pts = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
    return bool(np.all(points_free(env, pts)))


def test_workspace_rejects_bad_bounds():
    with pytest.raises(InvalidArgumentError):
        Workspace((0.0, 0.0), (1.0, 1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        Workspace((0.0, 2.0, 0.0), (1.0, 1.0, 1.0))


def test_obstacle_dimension_must_match_workspace():
    with pytest.raises(InvalidArgumentError):
        Environment(Workspace((0.0, 0.0), (1.0, 1.0)), (Sphere((0.5, 0.5, 0.5), 0.1),))


def test_point_free_boundaries(mixed_env):
    assert point_free(mixed_env, [1.0, 1.0, 1.0])
    assert not point_free(mixed_env, [2.0, 2.0, 2.0])
    # obstacles are closed sets
    assert not point_free(mixed_env, [2.5, 2.0, 2.0])
    assert not point_free(mixed_env, [5.0, 5.0, 4.0])
    assert point_free(mixed_env, [5.0, 5.0, 4.01])
    assert not point_free(mixed_env, [11.0, 5.0, 5.0])


def test_clearance_matches_geometry(mixed_env):
    assert clearance(mixed_env, [2.0, 2.0, 3.0]) == pytest.approx(0.5)
    assert clearance(mixed_env, [2.0, 2.0, 2.0]) == pytest.approx(-0.5)
    assert clearance(mixed_env, [5.0, 6.0, 1.0]) == pytest.approx(0.7)


def test_clearance_without_obstacles_is_distance_to_bounds(open_env):
    assert clearance(open_env, [1.0, 2.0, 0.5]) == pytest.approx(0.5)


def test_segment_free_examples(mixed_env):
    assert segment_free(mixed_env, np.array([0.5, 0.5, 0.5]), np.array([0.5, 9.0, 0.5]))
    assert not segment_free(mixed_env, np.array([0.5, 2.0, 2.0]), np.array([4.0, 2.0, 2.0]))
    assert not segment_free(mixed_env, np.array([4.0, 5.0, 1.0]), np.array([6.0, 5.0, 1.0]))
    assert not segment_free(mixed_env, np.array([6.5, 1.5, 1.0]), np.array([8.5, 1.5, 1.0]))


def test_segment_tangent_to_sphere_is_blocked():
    env = Environment(Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 4.0)), (Sphere((2.0, 2.0, 2.0), 1.0),))
    assert not segment_free(env, np.array([0.5, 2.0, 3.0]), np.array([3.5, 2.0, 3.0]))


def test_segment_free_agrees_with_dense_sampling(mixed_env, rng):
    lower = np.asarray(mixed_env.free_lower)
    upper = np.asarray(mixed_env.free_upper)
    disagreements = 0
    for _ in range(300):
        a = rng.uniform(lower, upper)
        b = a + rng.normal(scale=1.5, size=3)
        b = np.clip(b, lower, upper)
        exact = segment_free(mixed_env, a, b)
        sampled = _dense_segment_free(mixed_env, a, b, step=1e-3)
        if exact != sampled:
            # grazing contacts thinner than the sampling step
            assert not exact
            disagreements += 1
    assert disagreements <= 3


def test_segment_clearance_close_to_sampled_minimum(mixed_env):
    a = np.array([0.5, 2.0, 3.5])
    b = np.array([9.0, 5.0, 3.5])
    pts = a + np.linspace(0.0, 1.0, 20001)[:, None] * (b - a)
    sampled = float(clearances(mixed_env, pts).min())
    assert segment_clearance(mixed_env, a, b) == pytest.approx(sampled, abs=1e-3)


def test_inflate_grows_obstacles_and_shrinks_workspace(mixed_env):
    grown = inflate(mixed_env, 0.1)
    assert grown.inflation == pytest.approx(0.1)
    np.testing.assert_allclose(grown.free_lower, [0.1, 0.1, 0.1])
    assert not point_free(grown, [2.0, 2.0, 2.55])
    assert point_free(mixed_env, [2.0, 2.0, 2.55])
    # cylinders are extended at both caps
    assert not point_free(grown, [5.0, 5.0, 4.05])
    with pytest.raises(InvalidArgumentError):
        inflate(mixed_env, -0.1)


def test_with_obstacles_removes_by_index_and_grows_added(mixed_env):
    grown = inflate(mixed_env, 0.1)
    updated = with_obstacles(grown, add=[Sphere((9.0, 9.0, 9.0), 0.2)], remove=[0])
    assert len(updated.obstacles) == 3
    assert point_free(updated, [2.0, 2.0, 2.0])
    assert updated.obstacles[-1].radius == pytest.approx(0.3)


def test_boxes_hit_obstacles(mixed_env):
    lower = np.array([[1.0, 1.0, 1.0], [0.5, 6.0, 6.0], [7.5, 1.5, 2.5]])
    upper = np.array([[1.8, 1.8, 1.8], [1.0, 7.0, 7.0], [7.6, 1.6, 2.6]])
    hit = boxes_hit_obstacles(mixed_env, lower, upper)
    assert hit.tolist() == [True, False, True]


def test_poisson_forest_is_seeded_and_inside_bounds():
    ws = Workspace((0.0, 0.0, 0.0), (10.0, 10.0, 10.0))
    first = poisson_forest(1.2, ws, seed=5)
    second = poisson_forest(1.2, ws, seed=5)
    assert first.obstacles == second.obstacles
    assert 60 <= len(first.obstacles) <= 180
    for tree in first.obstacles:
        assert isinstance(tree, Cylinder)
        assert 0.05 <= tree.radius <= 0.15
        assert 5.0 <= tree.height <= 10.0
        x, y, z = tree.base
        assert tree.radius <= x <= 10.0 - tree.radius
        assert tree.radius <= y <= 10.0 - tree.radius
        assert z == 0.0


def test_poisson_forest_needs_positive_density():
    ws = Workspace((0.0, 0.0, 0.0), (10.0, 10.0, 10.0))
    with pytest.raises(InvalidArgumentError):
        poisson_forest(0.0, ws)


def test_two_dimensional_discs():
    env = Environment(Workspace((0.0, 0.0), (4.0, 4.0)), (Cylinder((2.0, 2.0), 0.5, 1.0),))
    assert not point_free(env, [2.2, 2.2])
    assert segment_free(env, np.array([0.5, 0.5]), np.array([3.5, 0.5]))
    assert not segment_free(env, np.array([0.5, 2.0]), np.array([3.5, 2.0]))


def test_floating_cylinder_grows_below_its_base():
    env = Environment(
        Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 4.0)), (Cylinder((2.0, 2.0, 1.0), 0.3, 1.0),)
    )
    below = [2.0, 2.0, 0.95]
    assert clearance(env, below) == pytest.approx(0.05)
    assert point_free(env, below)
    assert not point_free(inflate(env, 0.1), below)
    assert point_free(inflate(env, 0.1), [2.0, 2.0, 0.85])


def _random_env(rng) -> Environment:
    obstacles = []
    for _ in range(rng.integers(1, 6)):
        kind = rng.integers(3)
        if kind == 0:
            obstacles.append(Sphere(tuple(rng.uniform(0.5, 3.5, 3)), rng.uniform(0.05, 0.5)))
        elif kind == 1:
            base = (*rng.uniform(0.5, 3.5, 2), rng.uniform(0.0, 2.0))
            obstacles.append(Cylinder(base, rng.uniform(0.05, 0.5), rng.uniform(0.1, 2.0)))
        else:
            lower = rng.uniform(0.0, 3.0, 3)
            obstacles.append(Box(tuple(lower), tuple(lower + rng.uniform(0.05, 1.0, 3))))
    return Environment(Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 4.0)), tuple(obstacles))


@pytest.mark.parametrize(
    "envs, points", [(20, 500), pytest.param(200, 500, marks=pytest.mark.slow)]
)
def test_inflated_free_points_clear_raw_obstacles_by_margin(envs, points):
    rng = np.random.default_rng(77)
    checked = 0
    for _ in range(envs):
        env = _random_env(rng)
        margin = rng.uniform(0.01, 0.3)
        pts = rng.uniform(0.0, 4.0, (points, 3))
        free = points_free(inflate(env, margin), pts)
        assert np.all(clearances(env, pts[free]) > margin)
        checked += int(free.sum())
    assert checked > 0
