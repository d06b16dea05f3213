"""End-to-end planning query: sampled path, corridor, QP and verified trajectory."""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from numpy.typing import NDArray

from trajplan.config import Settings, get_settings
from trajplan.corridor import (
    CorridorPlan,
    State,
    build_waypoints,
    plan_from_waypoints,
    prepend_waypoint,
    witness_discrete,
)
from trajplan.env import Environment, inflate
from trajplan.errors import InvalidArgumentError, PlannerFailureError
from trajplan.qp import QpInstance, QpSolution, assemble, solve
from trajplan.sampler import Path, PlannerParams, plan_path, rejoin_path
from trajplan.trajectory import Trajectory, VerificationReport, verify

logger = logging.getLogger(__name__)


def corridor_margin(ell: float, dim: int, robot_radius: float = 0.0) -> float:
    """Obstacle inflation r + (3/2)·ℓ·√d covering both the robot and the trajectory deviation."""
    return robot_radius + 1.5 * ell * math.sqrt(dim)


@dataclass(frozen=True, eq=False)
class LeadIn:
    """First corridor step of a replan, copied from the outgoing trajectory.

    The new corridor starts at ``waypoint`` (the outgoing waypoint at the splice step) and
    the new path starts at ``anchor`` (the next outgoing waypoint); ``accel`` is the outgoing
    acceleration over that step.
    """

    waypoint: NDArray[np.float64]
    anchor: NDArray[np.float64]
    accel: NDArray[np.float64]


@dataclass(eq=False)
class PlanResult:
    """Every intermediate product of one planning query."""

    path: Path
    plan: CorridorPlan
    instance: QpInstance
    solution: QpSolution
    trajectory: Trajectory
    report: VerificationReport
    witness: Optional[List[State]]
    env_inflated: Environment
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.solution.optimal and self.report.passed

    def summary(self) -> dict:
        return {
            "success": self.success,
            "qp_status": self.solution.status.value,
            "verified": self.report.passed,
            "K": self.plan.K,
            "qp_variables": self.instance.n_variables,
            "h": self.plan.h,
            "t_f": self.trajectory.t_f,
            "path_length": self.path.cost,
            "clearance": self.path.min_clearance,
            "objective": self.solution.objective,
            "max_separation": self.report.max_separation,
            "separation_bound": self.report.separation_bound,
            "timings_ms": dict(self.timings),
        }


def _pad(plan: CorridorPlan) -> CorridorPlan:
    if plan.K >= 2:
        return plan
    extra = np.repeat(plan.waypoints[-1:], 2 - plan.K, axis=0)
    return plan_from_waypoints(np.vstack([plan.waypoints, extra]), plan.ell, plan.a_max)


def plan_trajectory(
    env_raw: Environment,
    x_start: State,
    x_goal: State,
    settings: Optional[Settings] = None,
    seed=None,
    ell: Optional[float] = None,
    a_max: Optional[float] = None,
    robot_radius: Optional[float] = None,
    lead_in: Optional[LeadIn] = None,
    guide: Optional[Path] = None,
) -> PlanResult:
    """Plan a verified trajectory from ``x_start`` to ``x_goal`` through ``env_raw``.

    Obstacles are inflated by ``corridor_margin`` before path search. The trajectory ends on
    the path's final node, which lies within the goal radius of ``x_goal.p``. With
    ``lead_in`` the corridor is prefixed by the committed step of an outgoing trajectory.
    A ``guide`` path, typically a refined one, is followed from its furthest visible node
    instead of sampling as long as its remainder is still free and ends at the goal.

    Raises PlannerFailureError (stage ``"sampling"``) when no path is found. A QP that does
    not reach optimality is returned as is; check ``result.success``.
    """
    settings = settings or get_settings()
    ell = settings.ell if ell is None else ell
    a_max = settings.a_max if a_max is None else a_max
    radius = settings.robot_radius if robot_radius is None else robot_radius
    if x_start.dim != env_raw.dim or x_goal.dim != env_raw.dim:
        raise InvalidArgumentError("Boundary states do not match the environment dimension")

    timings: Dict[str, float] = {}
    t_total = time.perf_counter()

    env_inflated = inflate(env_raw, corridor_margin(ell, env_raw.dim, radius))
    params = PlannerParams.from_settings(settings)
    path_start = x_start.p if lead_in is None else lead_in.anchor
    t0 = time.perf_counter()
    path = None
    if guide is not None:
        path = rejoin_path(env_inflated, path_start, x_goal.p, guide, params.goal_radius)
        if path is None:
            logger.info("Guide path no longer usable, sampling a new one")
        else:
            logger.debug(f"Following the guide path: {path.segments} segments, {path.cost:.3f} m")
    if path is None:
        path = plan_path(env_inflated, path_start, x_goal.p, seed=seed, params=params)
    timings["sampling_time_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    plan = build_waypoints(path, ell, a_max)
    if lead_in is not None:
        path = path.prepend(env_inflated, lead_in.waypoint)
        plan = prepend_waypoint(plan, lead_in.waypoint)
        if path.min_clearance <= 0.0:
            raise PlannerFailureError("Committed lead-in step is blocked", stage="sampling")
    plan = _pad(plan)
    goal = State(plan.waypoints[-1], x_goal.v, x_goal.a)
    if not np.array_equal(goal.p, x_goal.p):
        logger.debug(f"Trajectory ends {np.linalg.norm(goal.p - x_goal.p):.2e} m from the goal")

    witness: Optional[List[State]] = None
    try:
        witness = witness_discrete(
            plan, x_start, lead_in=None if lead_in is None else [lead_in.accel]
        )
    except InvalidArgumentError as e:
        logger.warning(f"No witness trajectory, solving cold: {e}")
    timings["corridor_time_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    instance = assemble(plan, x_start, goal)
    warm = None
    if settings.qp_warm_start and witness is not None:
        warm = np.array([s.a for s in witness])
    solution = solve(instance, tol=settings.qp_tol, max_iter=settings.qp_max_iter, warm_start=warm)
    timings["qp_time_ms"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    trajectory = Trajectory.from_solution(x_start, solution.accelerations, plan.h)
    report = verify(
        trajectory, path, plan, env_raw, dt=plan.h / settings.verify_dt_divisor, robot_radius=radius
    )
    timings["verify_time_ms"] = (time.perf_counter() - t0) * 1000
    timings["total_time_ms"] = (time.perf_counter() - t_total) * 1000

    result = PlanResult(
        path=path,
        plan=plan,
        instance=instance,
        solution=solution,
        trajectory=trajectory,
        report=report,
        witness=witness,
        env_inflated=env_inflated,
        timings=timings,
    )
    logger.info(
        f"Planned K={plan.K} ({instance.n_variables} variables): QP {solution.status.value}, "
        f"verified={report.passed}, {timings['total_time_ms']:.1f} ms"
    )
    return result
