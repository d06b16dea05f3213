"""Sampling-based path search: RRT* with rewiring and informed ellipsoidal sampling."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import List, Optional, Union

import numpy as np
from numpy.typing import NDArray

from trajplan.config import Settings
from trajplan.env import (
    Environment,
    clearances,
    point_free,
    segment_clearance,
    segment_free,
)
from trajplan.errors import InvalidArgumentError, PlannerFailureError
from trajplan.geometry import as_point, rotation_to_world

logger = logging.getLogger(__name__)

__all__ = [
    "PlannerParams",
    "Path",
    "Tree",
    "default_gamma",
    "informed_sample",
    "plan_path",
    "refine",
    "rejoin_path",
    "rewire_radius",
    "rotation_to_world",
    "dump_tree_csv",
]

COST_EPS = 1e-12
INFORMED_REJECTION_TRIES = 20
_INITIAL_CAPACITY = 1024


@dataclass(frozen=True)
class PlannerParams:
    """Budgets and tuning constants of one planning query."""

    goal_radius: float = 0.005
    rounds: int = 4
    iters_per_round: int = 2000
    steer_step: float = 0.5
    goal_bias: float = 0.05
    gamma: Optional[float] = None

    @classmethod
    def from_settings(cls, settings: Settings) -> "PlannerParams":
        return cls(
            goal_radius=settings.goal_radius,
            rounds=settings.rrt_rounds,
            iters_per_round=settings.rrt_iters_per_round,
            steer_step=settings.steer_step,
            goal_bias=settings.goal_bias,
            gamma=settings.rrt_gamma,
        )


def rewire_radius(tree_size: float, dim: int, gamma: float, max_step: float = math.inf) -> float:
    """RRT* neighbourhood radius γ·(log δ / δ)^(1/d), clamped to ``max_step``."""
    if tree_size < 2:
        raise InvalidArgumentError(f"Tree size must be at least 2, got {tree_size}")
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
    radius = gamma * (math.log(tree_size) / tree_size) ** (1.0 / dim)
    return min(radius, max_step)


def default_gamma(env: Environment) -> float:
    """Asymptotic-optimality constant 2·((1 + 1/d)·μ_free/ζ_d)^(1/d).

    The free measure is the workspace volume minus the obstacle volume, floored at 10% of
    the workspace volume.
    """
    d = env.dim
    unit_ball = {2: math.pi, 3: 4.0 * math.pi / 3.0}[d]
    volume = env.workspace.volume
    free = max(volume - env.obstacle_volume(), 0.1 * volume)
    return 2.0 * ((1.0 + 1.0 / d) * free / unit_ball) ** (1.0 / d)


def informed_sample(
    p_start,
    p_goal,
    c_best: float,
    rng: np.random.Generator,
    lower=None,
    upper=None,
) -> NDArray[np.float64]:
    """Sample uniformly from the prolate ellipsoid of points that could shorten a path of cost
    ``c_best``; with ``c_best = inf`` sample uniformly from the box [lower, upper]."""
    start = np.asarray(p_start, dtype=float)
    goal = np.asarray(p_goal, dtype=float)
    if math.isinf(c_best):
        if lower is None or upper is None:
            raise InvalidArgumentError("Uniform sampling needs workspace bounds")
        return rng.uniform(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))

    c_min = float(np.linalg.norm(goal - start))
    if c_best < c_min - COST_EPS:
        raise InvalidArgumentError(f"c_best {c_best} is below the straight-line cost {c_min}")
    d = start.size
    c_best = max(c_best, c_min)
    minor = math.sqrt(max(c_best * c_best - c_min * c_min, 0.0)) / 2.0
    radii = np.full(d, minor)
    radii[0] = c_best / 2.0
    rotation = rotation_to_world(goal - start) if c_min > 0 else np.eye(d)

    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    x_ball = direction * rng.uniform() ** (1.0 / d)
    return rotation @ (radii * x_ball) + 0.5 * (start + goal)


class Tree:
    """RRT* search tree together with the query it serves.

    Holds node positions, parent links and cost-to-come, plus the environment, goal and
    random generator so refinement can resume where planning stopped.
    """

    def __init__(
        self,
        env: Environment,
        root,
        goal,
        params: PlannerParams,
        rng: np.random.Generator,
    ):
        self.env = env
        self.goal = as_point(goal, env.dim)
        self.params = params
        self.rng = rng
        self.gamma = params.gamma if params.gamma is not None else default_gamma(env)
        self._nodes = np.empty((_INITIAL_CAPACITY, env.dim))
        self._parent = np.full(_INITIAL_CAPACITY, -1, dtype=int)
        self._cost = np.zeros(_INITIAL_CAPACITY)
        self.children: List[List[int]] = []
        self.goal_nodes: List[int] = []
        self.size = 0
        self.add(as_point(root, env.dim), -1)

    @property
    def nodes(self) -> NDArray[np.float64]:
        return self._nodes[: self.size]

    @property
    def parent(self) -> NDArray[np.int_]:
        return self._parent[: self.size]

    @property
    def cost(self) -> NDArray[np.float64]:
        return self._cost[: self.size]

    @property
    def root(self) -> NDArray[np.float64]:
        return self._nodes[0]

    def add(self, point, parent: int) -> int:
        if self.size == self._nodes.shape[0]:
            capacity = 2 * self.size
            self._nodes = np.resize(self._nodes, (capacity, self.env.dim))
            self._parent = np.resize(self._parent, capacity)
            self._cost = np.resize(self._cost, capacity)
        idx = self.size
        self._nodes[idx] = point
        self._parent[idx] = parent
        self.children.append([])
        if parent >= 0:
            step = float(np.linalg.norm(point - self._nodes[parent]))
            self._cost[idx] = self._cost[parent] + step
            self.children[parent].append(idx)
        else:
            self._cost[idx] = 0.0
        self.size += 1
        return idx

    def reparent(self, idx: int, new_parent: int) -> None:
        old_parent = int(self._parent[idx])
        self.children[old_parent].remove(idx)
        self.children[new_parent].append(idx)
        self._parent[idx] = new_parent
        new_cost = self._cost[new_parent] + float(
            np.linalg.norm(self._nodes[idx] - self._nodes[new_parent])
        )
        delta = new_cost - self._cost[idx]
        stack = [idx]
        while stack:
            node = stack.pop()
            self._cost[node] += delta
            stack.extend(self.children[node])

    def nearest(self, point) -> int:
        diff = self.nodes - point
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def near(self, point, radius: float) -> NDArray[np.int_]:
        diff = self.nodes - point
        return np.flatnonzero(np.einsum("ij,ij->i", diff, diff) <= radius * radius)

    def best_goal(self) -> Optional[int]:
        if not self.goal_nodes:
            return None
        ids = np.asarray(self.goal_nodes)
        costs = self._cost[ids]
        return int(ids[np.lexsort((ids, costs))[0]])

    def best_cost(self) -> float:
        best = self.best_goal()
        return math.inf if best is None else float(self._cost[best])

    def branch(self, idx: int) -> NDArray[np.float64]:
        chain = []
        while idx >= 0:
            chain.append(idx)
            idx = int(self._parent[idx])
        return self._nodes[chain[::-1]].copy()

    def recomputed_costs(self) -> NDArray[np.float64]:
        """Cost-to-come recomputed from scratch along parent links."""
        costs = np.zeros(self.size)
        for idx in range(self.size):
            total, node = 0.0, idx
            while self._parent[node] >= 0:
                parent = int(self._parent[node])
                total += float(np.linalg.norm(self._nodes[node] - self._nodes[parent]))
                node = parent
            costs[idx] = total
        return costs

    def extend(self, target) -> Optional[int]:
        """One RRT* iteration toward ``target``; returns the new node index or None."""
        env, step = self.env, self.params.steer_step
        i_nearest = self.nearest(target)
        x_nearest = self._nodes[i_nearest]
        diff = target - x_nearest
        dist = float(np.linalg.norm(diff))
        if dist == 0.0:
            return None
        x_new = x_nearest + diff * min(1.0, step / dist)
        if not point_free(env, x_new):
            return None

        radius = rewire_radius(max(self.size + 1, 2), env.dim, self.gamma, step)
        near = self.near(x_new, radius)
        candidates = np.union1d(near, [i_nearest])
        costs = self._cost[candidates] + np.linalg.norm(self._nodes[candidates] - x_new, axis=1)
        parent = None
        for j in np.lexsort((candidates, costs)):
            if segment_free(env, self._nodes[candidates[j]], x_new):
                parent = int(candidates[j])
                break
        if parent is None:
            return None

        idx = self.add(x_new, parent)
        for j in near:
            j = int(j)
            if j == parent:
                continue
            new_cost = self._cost[idx] + float(np.linalg.norm(self._nodes[j] - x_new))
            if new_cost < self._cost[j] - COST_EPS and segment_free(env, x_new, self._nodes[j]):
                self.reparent(j, idx)

        if np.linalg.norm(x_new - self.goal) <= self.params.goal_radius:
            self.goal_nodes.append(idx)
        return idx

    def grow(self, iterations: int, c_best: float) -> None:
        """Run ``iterations`` extensions with sampling restricted by ``c_best``."""
        for _ in range(iterations):
            searching = math.isinf(c_best) and not self.goal_nodes
            if searching and self.rng.uniform() < self.params.goal_bias:
                target = self.goal
            else:
                target = self._sample(c_best)
            self.extend(target)

    def _sample(self, c_best: float) -> NDArray[np.float64]:
        env = self.env
        lower, upper = env.free_lower, env.free_upper
        sample = informed_sample(self.root, self.goal, c_best, self.rng, lower, upper)
        for _ in range(INFORMED_REJECTION_TRIES):
            if np.all(sample >= lower) and np.all(sample <= upper):
                break
            sample = informed_sample(self.root, self.goal, c_best, self.rng, lower, upper)
        return sample

    def extract(self) -> "Path":
        best = self.best_goal()
        if best is None:
            raise PlannerFailureError("No path reached the goal region", stage="sampling")
        nodes = self.branch(best)
        at_goal = np.array_equal(nodes[-1], self.goal)
        if not at_goal and segment_free(self.env, nodes[-1], self.goal):
            nodes = np.vstack([nodes, self.goal])
        return Path.from_nodes(self.env, nodes, tree=self)


@dataclass(frozen=True)
class Path:
    """Polyline node[0..S] through free space with per-node and per-edge clearance."""

    nodes: NDArray[np.float64]
    node_clearance: NDArray[np.float64]
    edge_clearance: NDArray[np.float64]
    tree: Optional[Tree] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_nodes(cls, env: Environment, nodes, tree: Optional[Tree] = None) -> "Path":
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        edges = np.array(
            [segment_clearance(env, a, b) for a, b in zip(nodes[:-1], nodes[1:])], dtype=float
        )
        return cls(nodes, clearances(env, nodes), edges, tree)

    @property
    def start(self) -> NDArray[np.float64]:
        return self.nodes[0]

    @property
    def end(self) -> NDArray[np.float64]:
        return self.nodes[-1]

    @property
    def segments(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def cost(self) -> float:
        return float(np.linalg.norm(np.diff(self.nodes, axis=0), axis=1).sum())

    @property
    def min_clearance(self) -> float:
        if self.edge_clearance.size:
            return float(self.edge_clearance.min())
        return float(self.node_clearance.min())

    def prepend(self, env: Environment, point) -> "Path":
        """Path with ``point`` added in front (skipped when it coincides with the start)."""
        point = np.asarray(point, dtype=float)
        if np.array_equal(point, self.start):
            return self
        nodes = np.vstack([point, self.nodes])
        return Path(
            nodes,
            np.concatenate([clearances(env, point), self.node_clearance]),
            np.concatenate([[segment_clearance(env, point, self.start)], self.edge_clearance]),
            self.tree,
        )


def plan_path(
    env_inflated: Environment,
    p_start,
    p_goal,
    goal_radius: Optional[float] = None,
    rounds: Optional[int] = None,
    iters_per_round: Optional[int] = None,
    seed: Optional[Union[int, np.random.SeedSequence]] = None,
    params: Optional[PlannerParams] = None,
) -> Path:
    """Plan a shortest-found polyline from ``p_start`` to the goal region.

    Runs up to ``rounds`` rounds of RRT*; each round after a solution exists samples only the
    informed ellipse of the round's starting cost. Stops early once a round fails to lower the
    cost. ``goal_radius``, ``rounds`` and ``iters_per_round`` override the PlannerParams
    defaults and cannot be combined with ``params``.

    Raises PlannerFailureError (stage ``"sampling"``) when the start or goal is blocked or no
    path was found, and InvalidArgumentError when ``params`` comes with explicit budgets.
    """
    budgets = {
        "goal_radius": goal_radius,
        "rounds": rounds,
        "iters_per_round": iters_per_round,
    }
    given = {k: v for k, v in budgets.items() if v is not None}
    if params is None:
        params = PlannerParams(**given)
    elif given:
        raise InvalidArgumentError(
            f"Pass either params or explicit budgets, not both: {sorted(given)}"
        )
    start = as_point(p_start, env_inflated.dim)
    goal = as_point(p_goal, env_inflated.dim)
    if not point_free(env_inflated, start):
        raise PlannerFailureError(f"Start {start} is not in free space", stage="sampling")
    if not point_free(env_inflated, goal):
        raise PlannerFailureError(f"Goal {goal} is not in free space", stage="sampling")

    tree = Tree(env_inflated, start, goal, params, np.random.default_rng(seed))
    if np.linalg.norm(goal - start) <= params.goal_radius:
        tree.goal_nodes.append(0)
    elif segment_free(env_inflated, start, goal):
        # direct line of sight is already optimal
        tree.goal_nodes.append(tree.add(goal, 0))

    previous = math.inf
    for round_idx in range(params.rounds):
        c_best = tree.best_cost()
        if round_idx > 0 and not math.isinf(c_best) and c_best >= previous - COST_EPS:
            logger.debug(f"Early stop after round {round_idx}: cost {c_best:.4f} unchanged")
            break
        previous = c_best
        if not math.isinf(c_best) and c_best <= np.linalg.norm(goal - start) + COST_EPS:
            break
        tree.grow(params.iters_per_round, c_best)
        logger.debug(
            f"Round {round_idx + 1}: {tree.size} nodes, best cost {tree.best_cost():.4f}"
        )

    path = tree.extract()
    if path.min_clearance <= 0.0:
        raise PlannerFailureError(
            f"Path clearance {path.min_clearance:.3e} is not positive", stage="sampling"
        )
    logger.info(
        f"Path found: {path.segments} segments, cost {path.cost:.3f} m, "
        f"clearance {path.min_clearance:.3f} m, tree {tree.size} nodes"
    )
    return path


def refine(tree: Tree, current: Path, budget: int) -> Path:
    """Continue informed RRT* on ``tree`` for ``budget`` iterations; never increases cost."""
    if budget <= 0:
        return current
    tree.grow(budget, min(tree.best_cost(), current.cost))
    try:
        candidate = tree.extract()
    except PlannerFailureError:
        return current
    if candidate.cost < current.cost - COST_EPS and np.array_equal(candidate.end, current.end):
        return candidate
    return current


def rejoin_path(
    env: Environment, p_start, p_goal, guide: Path, goal_radius: float
) -> Optional[Path]:
    """Re-enter ``guide`` from ``p_start`` at its furthest node in line of sight.

    The remainder of ``guide`` must still be free in ``env`` and end within ``goal_radius`` of
    ``p_goal``. Returns None otherwise; the result keeps the guide's tree.
    """
    start = as_point(p_start, env.dim)
    nodes = guide.nodes
    if nodes.shape[1] != env.dim:
        return None
    if np.linalg.norm(guide.end - as_point(p_goal, env.dim)) > goal_radius + COST_EPS:
        return None
    if not point_free(env, start) or np.array_equal(start, guide.end):
        return None
    for j in range(nodes.shape[0] - 1, -1, -1):
        if j < nodes.shape[0] - 1 and not segment_free(env, nodes[j], nodes[j + 1]):
            break
        if segment_free(env, start, nodes[j]):
            rest = nodes[j + 1 :] if np.array_equal(start, nodes[j]) else nodes[j:]
            path = Path.from_nodes(env, np.vstack([start, rest]), guide.tree)
            if path.min_clearance > 0.0:
                return path
            break
    return None


def dump_tree_csv(tree: Tree, file_path: Union[str, FilePath]) -> None:
    """Write the tree as CSV rows ``node, parent, cost, x0..x{d-1}``."""
    header = ["node", "parent", "cost"] + [f"x{i}" for i in range(tree.env.dim)]
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for idx in range(tree.size):
            writer.writerow(
                [idx, int(tree.parent[idx]), repr(float(tree.cost[idx]))]
                + [repr(float(x)) for x in tree.nodes[idx]]
            )
