"""Randomized self-checks of the corridor step constructions and the QP dynamics maps."""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from trajplan.corridor import (
    CorridorPlan,
    State,
    corner_scale,
    corner_turn,
    plan_from_waypoints,
    region_contains,
    step_window_ok,
    straight_step,
)
from trajplan.qp import position_map, velocity_map
from trajplan.trajectory import Trajectory, integrate, sample, separation

logger = logging.getLogger(__name__)

PROPERTY_TOL = 1e-9
COEFFICIENT_TOL = 1e-12
MAX_WINDOW_TRIES = 100


class PropertyResult(BaseModel):
    name: str
    cases: int
    failures: int
    max_error: float = 0.0
    passed: bool
    detail: Optional[str] = None


def _random_plan(rng: np.random.Generator, dim: int, waypoints_of) -> CorridorPlan:
    ell = float(rng.uniform(0.01, 0.1))
    a_max = float(rng.uniform(1.0, 50.0))
    center = rng.uniform(-5.0, 5.0, size=dim)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    spacing = float(rng.uniform(0.05, 1.0)) * ell
    return plan_from_waypoints(waypoints_of(center, spacing * direction), ell, a_max)


def _admissible_velocity(rng: np.random.Generator, delta, plan: CorridorPlan):
    """Rejection-sample a velocity from the admissible window of ``delta``."""
    u = delta / plan.ell
    sign = np.where(u >= 0.0, 1.0, -1.0)
    for _ in range(MAX_WINDOW_TRIES):
        signed = rng.uniform(np.abs(u) - 1.0, 1.0)
        v = sign * signed * plan.v_max
        if step_window_ok(v, delta, plan, tol=0.0):
            return v
    return np.zeros_like(delta)


def straight_step_suite(n: int = 100_000, seed: int = 0, dim: int = 3) -> PropertyResult:
    """Straight-step construction lands in the next region within the box limits.

    Also checks that the exit velocity points along the step and stays admissible for a
    repeat of the same step.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(n):
        plan = _random_plan(rng, dim, lambda c, delta: np.vstack([c, c + delta]))
        delta = plan.step(0)
        p = plan.waypoints[0] + rng.uniform(-plan.ell, plan.ell, size=dim)
        v = _admissible_velocity(rng, delta, plan)
        a, p_next, v_next = straight_step(p, v, plan, 0)

        region = np.max(np.abs(p_next - plan.waypoints[1])) / plan.ell - 1.0
        speed = np.max(np.abs(v_next)) / plan.v_max - 1.0
        accel = np.max(np.abs(a)) / plan.a_max - 1.0
        heading = -float(v_next @ delta) / (plan.v_max * plan.ell)
        error = max(region, speed, accel, heading)
        worst = max(worst, error)
        if error > PROPERTY_TOL or not step_window_ok(v_next, delta, plan):
            failures += 1
    logger.info(f"straight-step suite: {failures}/{n} failures, worst excess {worst:.3e}")
    return PropertyResult(
        name="straight-step", cases=n, failures=failures, max_error=worst, passed=failures == 0
    )


def corner_turn_suite(n: int = 100_000, seed: int = 0, dim: int = 3) -> PropertyResult:
    """Two-step corner construction stays in the node region and exits at the requested speed."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(n):
        plan = _random_plan(rng, dim, lambda c, delta: np.vstack([c, c, c + delta]))
        node = plan.waypoints[0]
        p = node + rng.uniform(-plan.ell, plan.ell, size=dim)
        v = rng.uniform(-plan.v_max, plan.v_max, size=dim)
        v_f = float(rng.uniform(0.0, plan.v_max / corner_scale(plan, 0)))
        a0, a1, (mid, end) = corner_turn(p, v, v_f, plan, 0)

        e_hat = plan.step(1) / np.linalg.norm(plan.step(1))
        exit_velocity = corner_scale(plan, 0) * v_f * e_hat
        errors = [
            np.max(np.abs(mid.p - node)) / plan.ell - 1.0,
            np.max(np.abs(end.p - plan.waypoints[2])) / plan.ell - 1.0,
            np.max(np.abs(mid.v)) / plan.v_max - 1.0,
            max(np.max(np.abs(a0)), np.max(np.abs(a1))) / plan.a_max - 1.0,
            np.max(np.abs(end.v - exit_velocity)) / plan.v_max,
            abs(np.max(np.abs(end.v)) - v_f) / plan.v_max,
        ]
        error = float(max(errors))
        worst = max(worst, error)
        if error > PROPERTY_TOL:
            failures += 1
    logger.info(f"corner-turn suite: {failures}/{n} failures, worst excess {worst:.3e}")
    return PropertyResult(
        name="corner-turn", cases=n, failures=failures, max_error=worst, passed=failures == 0
    )


def extremal_step_check(ell: float = 0.05, a_max: float = 20.0) -> PropertyResult:
    """Worst single step: start at +ℓ off the path moving away at V_max, braking at A_max.

    The peak offset is (3/2)ℓ at mid-step and the step ends back at +ℓ.
    """
    plan = plan_from_waypoints(np.zeros((2, 3)), ell, a_max)
    start = State([ell, 0.0, 0.0], [plan.v_max, 0.0, 0.0], [-a_max, 0.0, 0.0])
    traj = Trajectory(start, [[-a_max, 0.0, 0.0]], plan.h)
    path = np.array([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0]])

    peak = sample(traj, plan.h / 2)
    errors = [
        abs(peak.p[0] - 1.5 * ell),
        abs(separation(traj, path, plan.h / 2) - 1.5 * ell),
        abs(traj.positions[-1][0] - ell),
        abs(peak.v[0]) / plan.v_max * ell,
    ]
    worst = float(max(errors))
    passed = worst <= PROPERTY_TOL and region_contains(
        [0.0, 0.0, 0.0], ell, traj.positions[-1], tol=ell * PROPERTY_TOL
    )
    return PropertyResult(
        name="extremal-step",
        cases=1,
        failures=0 if passed else 1,
        max_error=worst,
        passed=passed,
        detail=f"peak offset {peak.p[0]:.12g} m for ℓ={ell}",
    )


def coefficient_oracle(max_k: int = 20, trials: int = 20, seed: int = 0) -> PropertyResult:
    """Closed-form position and velocity maps against step-by-step integration."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    cases = 0
    for K in range(1, max_k + 1):  # noqa: N806
        for _ in range(trials):
            h = float(rng.uniform(0.01, 0.5))
            start = State(rng.normal(size=1), rng.normal(size=1), np.zeros(1))
            acc = rng.normal(size=K + 1)
            states = integrate(start, acc[:K, None], h)
            steps = np.arange(K + 1)
            expected_p = np.array([s.p[0] for s in states])
            expected_v = np.array([s.v[0] for s in states])
            p = start.p[0] + h * steps * start.v[0] + position_map(K, h) @ acc
            v = start.v[0] + velocity_map(K, h) @ acc
            scale = max(1.0, float(np.max(np.abs(expected_p))), float(np.max(np.abs(expected_v))))
            error = max(np.max(np.abs(p - expected_p)), np.max(np.abs(v - expected_v))) / scale
            worst = max(worst, float(error))
            cases += 1
            if error >= COEFFICIENT_TOL:
                failures += 1
    return PropertyResult(
        name="coefficient-oracle",
        cases=cases,
        failures=failures,
        max_error=worst,
        passed=failures == 0,
    )


def run_self_checks(n: int = 100_000, seed: int = 0) -> List[PropertyResult]:
    """All suites; ``n`` randomized cases for each step construction."""
    results = [
        straight_step_suite(n, seed),
        corner_turn_suite(n, seed + 1),
        extremal_step_check(),
        coefficient_oracle(seed=seed),
    ]
    for result in results:
        if not result.passed:
            logger.warning(
                f"Self-check {result.name} failed {result.failures}/{result.cases} "
                f"(max error {result.max_error:.3e})"
            )
    return results
