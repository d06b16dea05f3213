"""Continuous trajectories from piecewise-constant accelerations and their verification."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from trajplan.corridor import CorridorPlan, State
from trajplan.env import Environment, boxes_hit_obstacles, inflate, points_free
from trajplan.errors import InvalidArgumentError
from trajplan.geometry import as_point, point_polyline_distances

logger = logging.getLogger(__name__)

BOX_TOL = 1e-6
SEPARATION_TOL = 1e-9
DEFAULT_DT_DIVISOR = 50
MIN_DT_DIVISOR = 20
CERTIFY_DEPTH = 16


def integrate(x_start: State, accels, h: float, a_final=None) -> List[State]:
    """Discrete states under constant acceleration per step.

    One state per acceleration row plus the final state; state k carries ``accels[k]`` and
    the final state carries ``a_final`` (zero by default).
    """
    acc = np.atleast_2d(np.asarray(accels, dtype=float))
    if not np.all(np.isfinite(acc)):
        raise InvalidArgumentError("Accelerations must be finite")
    if acc.shape[1] != x_start.dim:
        raise InvalidArgumentError(f"Accelerations have {acc.shape[1]} axes, state {x_start.dim}")
    last = np.zeros(x_start.dim) if a_final is None else as_point(a_final, x_start.dim)

    p, v = x_start.p.copy(), x_start.v.copy()
    states = []
    for a in acc:
        states.append(State(p, v, a))
        p, v = p + h * v + 0.5 * h * h * a, v + h * a
    states.append(State(p, v, last))
    return states


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-quadratic position over [0, K·h] with knots at multiples of h."""

    x_start: State
    accels: NDArray[np.float64]
    h: float
    a_final: Optional[NDArray[np.float64]] = None
    positions: NDArray[np.float64] = field(init=False, repr=False)
    velocities: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidArgumentError(f"Time step must be positive, got {self.h}")
        acc = np.atleast_2d(np.asarray(self.accels, dtype=float)).reshape(-1, self.x_start.dim)
        final = np.zeros(self.x_start.dim) if self.a_final is None else self.a_final
        states = integrate(self.x_start, acc, self.h, final)
        object.__setattr__(self, "accels", acc)
        object.__setattr__(self, "a_final", states[-1].a)
        object.__setattr__(self, "positions", np.array([s.p for s in states]))
        object.__setattr__(self, "velocities", np.array([s.v for s in states]))

    @classmethod
    def from_solution(cls, x_start: State, accelerations, h: float) -> "Trajectory":
        """Trajectory from a QP acceleration sequence a[0..K]; a[K] acts at t_f only."""
        acc = np.atleast_2d(np.asarray(accelerations, dtype=float))
        start = State(x_start.p, x_start.v, acc[0])
        return cls(start, acc[:-1], h, acc[-1])

    @property
    def K(self) -> int:  # noqa: N802
        return self.accels.shape[0]

    @property
    def dim(self) -> int:
        return self.x_start.dim

    @property
    def t_f(self) -> float:
        return self.K * self.h

    def knot_accels(self) -> NDArray[np.float64]:
        return np.vstack([self.accels, self.a_final[None, :]])

    def states(self) -> List[State]:
        acc = self.knot_accels()
        return [State(self.positions[k], self.velocities[k], acc[k]) for k in range(self.K + 1)]

    def jerk(self) -> NDArray[np.float64]:
        return np.diff(self.knot_accels(), axis=0) / self.h

    def evaluate(self, times) -> Tuple[NDArray, NDArray, NDArray]:
        """Vectorized (p, v, a) at ``times``; acceleration is right-continuous."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        span = self.t_f * (1 + 1e-12) + 1e-15
        if np.any(t < -1e-15) or np.any(t > span):
            raise InvalidArgumentError(f"Times outside [0, {self.t_f}]")
        if self.K == 0:
            n = t.size
            return (
                np.repeat(self.positions[:1], n, axis=0),
                np.repeat(self.velocities[:1], n, axis=0),
                np.repeat(self.a_final[None, :], n, axis=0),
            )
        k = np.clip(np.floor(t / self.h + 1e-9).astype(int), 0, self.K - 1)
        tau = (t - k * self.h)[:, None]
        acc = self.accels[k]
        p = self.positions[k] + self.velocities[k] * tau + 0.5 * acc * tau * tau
        v = self.velocities[k] + acc * tau
        at_end = t >= self.t_f
        p[at_end] = self.positions[-1]
        v[at_end] = self.velocities[-1]
        acc = np.where(at_end[:, None], self.a_final[None, :], acc)
        return p, v, acc

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "t_f": self.t_f,
            "x_start": self.x_start.to_dict(),
            "accelerations": self.knot_accels().tolist(),
        }


def sample(traj: Trajectory, t: float) -> State:
    """Exact state at time ``t``."""
    if not (0.0 <= t <= traj.t_f * (1 + 1e-12) + 1e-15):
        raise InvalidArgumentError(f"t={t} outside [0, {traj.t_f}]")
    p, v, a = traj.evaluate([t])
    return State(p[0], v[0], a[0])


def separation(traj: Trajectory, path, t: float) -> float:
    """Distance from p(t) to the polyline ``path``."""
    p, _, _ = traj.evaluate([t])
    nodes = getattr(path, "nodes", path)
    return float(point_polyline_distances(p, nodes)[0])


def _step_grid(traj: Trajectory, dt: float):
    n_sub = max(1, math.ceil(traj.h / dt - 1e-9))
    taus = np.linspace(0.0, 1.0, n_sub + 1)
    times = (np.arange(traj.K)[:, None] + taus[None, :]) * traj.h
    return taus, times


def _step_extremes(traj: Trajectory, plan: CorridorPlan):
    """Per-step, per-axis extremes over τ ∈ [0, 1] of the arc and of its deviation e(τ).

    ``e(τ) = (p_k − wp[k]) + (h·v_k − Δ_k)τ + (h²/2)·a_k·τ²`` is the offset from the point moving
    linearly from wp[k] to wp[k+1]; its per-axis maximum is attained at τ = 0, τ = 1 or the vertex.
    """
    h = traj.h
    K = traj.K  # noqa: N806
    p0 = traj.positions[:K]
    v0 = traj.velocities[:K]
    acc = traj.accels
    delta = plan.waypoints[1 : K + 1] - plan.waypoints[:K]

    lin = h * v0
    quad = 0.5 * h * h * acc
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.where(quad != 0.0, -lin / (2.0 * quad), -1.0)
    vertex = np.clip(vertex, 0.0, 1.0)
    candidates = np.stack([np.zeros_like(vertex), np.ones_like(vertex), vertex])
    arc = p0[None] + lin[None] * candidates + quad[None] * candidates**2
    arc_lo, arc_hi = arc.min(axis=0), arc.max(axis=0)

    e0 = p0 - plan.waypoints[:K]
    e_lin = lin - delta
    with np.errstate(divide="ignore", invalid="ignore"):
        e_vertex = np.where(quad != 0.0, -e_lin / (2.0 * quad), -1.0)
    e_vertex = np.clip(e_vertex, 0.0, 1.0)
    e_cand = np.stack([np.zeros_like(e_vertex), np.ones_like(e_vertex), e_vertex])
    dev = e0[None] + e_lin[None] * e_cand + quad[None] * e_cand**2
    return arc_lo, arc_hi, np.abs(dev).max(axis=0)


def _arc_pieces(traj: Trajectory, steps, t0, t1):
    """Per-axis bounds of each step arc restricted to τ ∈ [t0, t1], plus its midpoint."""
    h = traj.h
    p0 = traj.positions[steps]
    lin = h * traj.velocities[steps]
    quad = 0.5 * h * h * traj.accels[steps]
    lo, hi = t0[:, None], t1[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.where(quad != 0.0, -lin / (2.0 * quad), lo)
    vertex = np.clip(vertex, lo, hi)
    cand = np.stack([np.broadcast_to(lo, vertex.shape), np.broadcast_to(hi, vertex.shape), vertex])
    arc = p0[None] + lin[None] * cand + quad[None] * cand**2
    mid = 0.5 * (lo + hi)
    return arc.min(axis=0), arc.max(axis=0), p0 + lin * mid + quad * mid**2


def _uncertified_arcs(traj: Trajectory, env: Environment, steps) -> List[int]:
    """Steps that bisection cannot clear.

    Each arc is halved until the bounding box of every piece misses all obstacles. A step
    fails when a piece midpoint lies in an obstacle or pieces still touch one after
    ``CERTIFY_DEPTH`` halvings.
    """
    steps = np.asarray(steps, dtype=int)
    t0, t1 = np.zeros(steps.size), np.ones(steps.size)
    failed: set = set()
    for depth in range(CERTIFY_DEPTH + 1):
        if not steps.size:
            break
        lo, hi, mid = _arc_pieces(traj, steps, t0, t1)
        hit = boxes_hit_obstacles(env, lo, hi)
        steps, t0, t1, mid = steps[hit], t0[hit], t1[hit], mid[hit]
        failed.update(int(k) for k in steps[~points_free(env, mid)])
        if depth == CERTIFY_DEPTH:
            failed.update(int(k) for k in steps)
            break
        open_ = ~np.isin(steps, list(failed))
        steps, t0, t1 = steps[open_], t0[open_], t1[open_]
        half = 0.5 * (t0 + t1)
        steps = np.concatenate([steps, steps])
        t0, t1 = np.concatenate([t0, half]), np.concatenate([half, t1])
    return sorted(failed)


class VerificationReport(BaseModel):
    """Outcome of checking one trajectory against its corridor and the raw environment."""

    passed: bool
    max_separation: float = Field(description="Largest sampled b(t) (m)")
    analytic_separation: float = Field(description="Largest per-step analytic bound on b(t) (m)")
    separation_bound: float = Field(description="(3/2)·ℓ·√d (m)")
    max_axis_deviation: float = Field(description="Largest per-axis step deviation (m)")
    max_speed: float = Field(description="Largest ‖v[k]‖∞ (m/s)")
    max_acceleration: float = Field(description="Largest ‖a[k]‖∞ (m/s²)")
    velocity_violation: float = Field(description="Worst excess over V_max (m/s)")
    acceleration_violation: float = Field(description="Worst excess over A_max (m/s²)")
    region_violation: float = Field(description="Worst excess of ‖p[k] − wp[k]‖∞ over ℓ (m)")
    region_flags: List[bool] = Field(default_factory=list)
    goal_error: float = Field(description="‖p[K] − wp[K]‖∞ (m)")
    collision: bool
    uncertified_steps: List[int] = Field(
        default_factory=list, description="Steps whose whole-arc bounding box touches an obstacle"
    )
    colliding_steps: List[int] = Field(
        default_factory=list, description="Steps not cleared by halving the arc"
    )
    corner_steps: List[int] = Field(default_factory=list)
    corner_max_separation: float = 0.0
    samples: int = 0
    dt: float = 0.0
    failures: List[str] = Field(default_factory=list)


def verify(
    traj: Trajectory,
    path,
    plan: CorridorPlan,
    env_raw: Environment,
    dt: Optional[float] = None,
    robot_radius: float = 0.0,
) -> VerificationReport:
    """Check separation, box limits, region membership and collision freedom.

    Collision freedom is checked on samples spaced at most ``dt`` and certified per step with
    the axis-aligned bounding box of the quadratic arc. Steps whose box touches an obstacle
    are listed in ``uncertified_steps`` and halved until every piece has a free box; those that
    cannot be cleared are ``colliding_steps`` and fail the report.
    """
    h = traj.h
    if dt is None:
        dt = h / DEFAULT_DT_DIVISOR
    if dt > h / MIN_DT_DIVISOR:
        logger.warning(f"Verification step {dt:.3e} s above h/{MIN_DT_DIVISOR}; clamping")
        dt = h / MIN_DT_DIVISOR
    if plan.K != traj.K:
        logger.warning(f"Plan has K={plan.K}, trajectory K={traj.K}")
    K, d = min(plan.K, traj.K), traj.dim  # noqa: N806
    nodes = np.atleast_2d(np.asarray(getattr(path, "nodes", path), dtype=float))
    bound = 1.5 * plan.ell * math.sqrt(d)
    failures: List[str] = []

    taus, times = _step_grid(traj, dt)
    times = times[:K]
    points, _, _ = traj.evaluate(times.reshape(-1))
    sep = point_polyline_distances(points, nodes).reshape(K, -1) if K else np.zeros((0, 1))
    step_sep = sep.max(axis=1) if K else np.zeros(0)
    max_sep = float(step_sep.max(initial=0.0))

    arc_lo, arc_hi, dev = _step_extremes(traj, plan) if K else (None, None, np.zeros((0, d)))
    analytic = np.linalg.norm(dev, axis=1) if K else np.zeros(0)
    analytic_max = float(analytic.max(initial=0.0))
    max_dev = float(dev.max(initial=0.0))
    if max_sep > bound + SEPARATION_TOL:
        failures.append(f"sampled separation {max_sep:.6g} exceeds bound {bound:.6g}")
    if analytic_max > bound + SEPARATION_TOL:
        failures.append(f"analytic separation {analytic_max:.6g} exceeds bound {bound:.6g}")

    acc = traj.knot_accels()
    speeds = np.abs(traj.velocities).max(axis=1)
    accs = np.abs(acc).max(axis=1)
    v_excess = float(max(speeds.max(initial=0.0) - plan.v_max, 0.0))
    a_excess = float(max(accs.max(initial=0.0) - plan.a_max, 0.0))
    if v_excess > BOX_TOL:
        failures.append(f"velocity exceeds V_max by {v_excess:.3e}")
    if a_excess > BOX_TOL:
        failures.append(f"acceleration exceeds A_max by {a_excess:.3e}")

    n_knots = min(plan.K, traj.K) + 1
    offsets = np.abs(traj.positions[:n_knots] - plan.waypoints[:n_knots]).max(axis=1)
    region_excess = offsets - plan.ell
    flags = [bool(x <= BOX_TOL) for x in region_excess]
    if not all(flags):
        failures.append(f"{flags.count(False)} knot(s) outside their region")
    goal_error = float(np.max(np.abs(traj.positions[-1] - plan.waypoints[-1])))
    if goal_error > BOX_TOL:
        failures.append(f"final position misses the last waypoint by {goal_error:.3e}")

    env_check = inflate(env_raw, robot_radius) if robot_radius > 0 else env_raw
    free = points_free(env_check, points).reshape(K, -1) if K else np.ones((0, 1), dtype=bool)
    collision = bool(not np.all(free))
    if collision:
        failures.append("sampled trajectory leaves free space")
    uncertified: List[int] = []
    colliding: List[int] = []
    if K:
        hit = boxes_hit_obstacles(env_check, arc_lo, arc_hi)
        uncertified = [int(k) for k in np.flatnonzero(hit)]
        if uncertified:
            logger.debug(f"{len(uncertified)} step(s) need halving to certify")
            colliding = _uncertified_arcs(traj, env_check, uncertified)
        if colliding:
            collision = True
            failures.append(
                f"{len(colliding)} step(s) not certified collision-free: {colliding[:5]}"
            )

    corners = [k for k in range(K) if not np.any(plan.waypoints[k + 1] - plan.waypoints[k])]
    corner_sep = float(step_sep[corners].max(initial=0.0)) if corners else 0.0

    report = VerificationReport(
        passed=not failures,
        max_separation=max_sep,
        analytic_separation=analytic_max,
        separation_bound=bound,
        max_axis_deviation=max_dev,
        max_speed=float(speeds.max(initial=0.0)),
        max_acceleration=float(accs.max(initial=0.0)),
        velocity_violation=v_excess,
        acceleration_violation=a_excess,
        region_violation=float(max(region_excess.max(initial=-np.inf), 0.0)),
        region_flags=flags,
        goal_error=goal_error,
        collision=collision,
        uncertified_steps=uncertified,
        colliding_steps=colliding,
        corner_steps=corners,
        corner_max_separation=corner_sep,
        samples=int(points.shape[0]),
        dt=float(dt),
        failures=failures,
    )
    if failures:
        logger.warning(f"Verification failed: {'; '.join(failures)}")
    return report


def time_series(
    traj: Trajectory, dt: float, duration: Optional[float] = None
) -> Tuple[NDArray, NDArray, NDArray, NDArray]:
    """(t, p, v, a) every ``dt`` from 0 up to ``duration`` (or t_f), end point included."""
    if not dt > 0:
        raise InvalidArgumentError(f"Sampling step must be positive, got {dt}")
    stop = traj.t_f if duration is None else min(max(duration, 0.0), traj.t_f)
    times = np.append(np.arange(0.0, stop, dt), stop)
    p, v, a = traj.evaluate(times)
    return times, p, v, a


def export_csv(
    traj: Trajectory,
    file_path: Union[str, FilePath],
    dt: float,
    t0: float = 0.0,
    duration: Optional[float] = None,
) -> FilePath:
    """Write the time series ``t, p0.., v0.., a0..``; times in the file are shifted by ``t0``."""
    times, p, v, a = time_series(traj, dt, duration)
    d = traj.dim
    header = ["t"] + [f"{q}{i}" for q in "pva" for i in range(d)]
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for t, row in zip(times, np.hstack([p, v, a])):
            writer.writerow([f"{t0 + t:.9g}"] + [f"{x:.9g}" for x in row])
    return FilePath(file_path)
