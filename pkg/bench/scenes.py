"""Benchmark environments: Poisson forests, a fixed string scene and a walled maze."""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from trajplan.env import Box, Cylinder, Environment, Workspace, points_free, segment_free
from trajplan.errors import PlannerFailureError
from trajplan.scenario import Scenario

logger = logging.getLogger(__name__)

STRING_WORKSPACE = Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 2.5))
STRING_COUNT = 180
STRING_LENGTH = 0.6
STRING_THICKNESS = 0.005
POLE_COUNT = 20
POLE_RADIUS = 0.02
STRING_MIN_DISTANCE = 3.0

MAX_PAIR_TRIES = 1000
_POINT_BATCH = 256


def forest_workspace(size: float) -> Workspace:
    return Workspace((0.0, 0.0, 0.0), (size, size, size))


def sample_free_points(env: Environment, rng: np.random.Generator, count: int) -> NDArray:
    """``count`` uniform samples from the free space of ``env`` (rejection sampling)."""
    found = []
    lower, upper = env.free_lower, env.free_upper
    for _ in range(MAX_PAIR_TRIES):
        batch = rng.uniform(lower, upper, size=(_POINT_BATCH, env.dim))
        found.extend(batch[points_free(env, batch)])
        if len(found) >= count:
            return np.asarray(found[:count])
    raise PlannerFailureError("Free space too small to sample from", stage="sampling")


def sample_start_goal(
    env_inflated: Environment,
    rng: np.random.Generator,
    min_distance: float,
    max_tries: int = MAX_PAIR_TRIES,
) -> Tuple[NDArray, NDArray]:
    """Free start and goal points at least ``min_distance`` apart."""
    for _ in range(max_tries):
        start, goal = sample_free_points(env_inflated, rng, 2)
        if np.linalg.norm(goal - start) >= min_distance:
            return start, goal
    raise PlannerFailureError(
        f"No free start/goal pair {min_distance} m apart after {max_tries} tries",
        stage="sampling",
    )


def string_scene(seed: int = 0) -> Environment:
    """Cluttered room of thin taut strings plus vertical poles (200 obstacles).

    Each string is a box ``STRING_LENGTH`` long along a random axis with a square
    ``STRING_THICKNESS`` cross-section; poles span the full height.
    """
    rng = np.random.default_rng(seed)
    lower = np.asarray(STRING_WORKSPACE.lower)
    upper = np.asarray(STRING_WORKSPACE.upper)
    obstacles = []
    for _ in range(STRING_COUNT):
        axis = int(rng.integers(3))
        size = np.full(3, STRING_THICKNESS)
        size[axis] = STRING_LENGTH
        corner = rng.uniform(lower, upper - size)
        obstacles.append(Box(tuple(corner), tuple(corner + size)))
    height = float(upper[2] - lower[2])
    for _ in range(POLE_COUNT):
        xy = rng.uniform(lower[:2] + POLE_RADIUS, upper[:2] - POLE_RADIUS)
        obstacles.append(Cylinder((xy[0], xy[1], lower[2]), POLE_RADIUS, height))
    logger.debug(f"String scene with {len(obstacles)} obstacles (seed {seed})")
    return Environment(STRING_WORKSPACE, tuple(obstacles))


def string_pairs(
    env_inflated: Environment, count: int, seed: int = 0, min_distance: float = STRING_MIN_DISTANCE
):
    """Start/goal pairs shared by every ℓ of a sweep, free under the widest corridor.

    Pairs with a straight line of sight are skipped so every query needs a search.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(MAX_PAIR_TRIES * max(count, 1)):
        if len(pairs) == count:
            break
        start, goal = sample_start_goal(env_inflated, rng, min_distance)
        if not segment_free(env_inflated, start, goal):
            pairs.append((start, goal))
    if len(pairs) < count:
        raise PlannerFailureError(f"Only {len(pairs)} of {count} start/goal pairs found")
    return pairs


MAZE_WALL_THICKNESS = 0.05


def maze_scenario() -> Scenario:
    """Walled 3 × 5 × 1 m maze visited through six sequential goals and back."""
    t = MAZE_WALL_THICKNESS / 2
    walls = [
        (0.0, 2.2, 1.0),
        (0.8, 3.0, 2.0),
        (0.0, 2.2, 3.0),
        (0.8, 3.0, 4.0),
    ]
    obstacles = [
        {"type": "box", "lower": [x0, y - t, 0.0], "upper": [x1, y + t, 1.0]}
        for x0, x1, y in walls
    ]
    goals = [
        [2.6, 1.5, 0.5],
        [0.4, 2.5, 0.5],
        [2.6, 3.5, 0.5],
        [0.4, 4.6, 0.5],
        [2.6, 4.6, 0.5],
        [0.4, 0.4, 0.5],
    ]
    return Scenario(
        name="maze",
        description="Sequential goals through a four-wall maze; each goal starts the next leg",
        workspace={"lower": [0.0, 0.0, 0.0], "upper": [3.0, 5.0, 1.0]},
        obstacles=obstacles,
        start={"p": [0.4, 0.4, 0.5]},
        goal={"p": goals[0]},
        tasks=[{"p": g} for g in goals[1:]],
        ell=0.02,
        a_max=20.0,
        robot_radius=0.035,
        seed=7,
    )
