"""Waypoint corridor construction, timing parameters and constructive witness trajectories.

Notation in this module follows the normalized double integrator: with ``x = offset / ℓ``,
``w = v / V_max`` and ``α = a / A_max`` one step of length ``h`` reads
``x' = x + 2w + 2α`` and ``w' = w + 2α`` (a consequence of ``V_max² = ℓ·A_max`` and
``h² = 4ℓ / A_max``).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from trajplan.errors import InvalidArgumentError
from trajplan.geometry import as_point, rotation_to_world

logger = logging.getLogger(__name__)

ADMISSIBLE_TOL = 1e-9
CEIL_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class State:
    """Position, velocity and acceleration of the point robot."""

    p: NDArray[np.float64]
    v: NDArray[np.float64]
    a: NDArray[np.float64]

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        a = np.array(self.a, dtype=float).reshape(-1)
        if not (p.shape == v.shape == a.shape):
            raise InvalidArgumentError(f"State shapes differ: {p.shape}, {v.shape}, {a.shape}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @classmethod
    def at_rest(cls, p) -> "State":
        p = np.asarray(p, dtype=float)
        return cls(p, np.zeros_like(p), np.zeros_like(p))

    @property
    def dim(self) -> int:
        return self.p.size

    @property
    def at_rest_state(self) -> bool:
        return not np.any(self.v) and not np.any(self.a)

    def allowed(self, v_max: float, a_max: float, tol: float = ADMISSIBLE_TOL) -> bool:
        return bool(
            np.max(np.abs(self.v), initial=0.0) <= v_max * (1 + tol)
            and np.max(np.abs(self.a), initial=0.0) <= a_max * (1 + tol)
        )

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "v": self.v.tolist(), "a": self.a.tolist()}


@dataclass(frozen=True, eq=False)
class CorridorPlan:
    """Time-indexed waypoints wp[0..K] with hypercube half-width ℓ."""

    waypoints: NDArray[np.float64]
    ell: float
    h: float
    v_max: float
    a_max: float
    node_marks: Tuple[int, ...]

    @property
    def K(self) -> int:  # noqa: N802
        return self.waypoints.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.waypoints.shape[1]

    @property
    def t_f(self) -> float:
        return self.K * self.h

    def step(self, k: int) -> NDArray[np.float64]:
        return self.waypoints[k + 1] - self.waypoints[k]


def timing_params(ell: float, a_max: float) -> Tuple[float, float]:
    """(V_max, h) with V_max² = ℓ·A_max and h² = 4ℓ/A_max, so that h·V_max = 2ℓ."""
    if not ell > 0 or not a_max > 0:
        raise InvalidArgumentError(f"ℓ and A_max must be positive, got {ell}, {a_max}")
    return math.sqrt(ell * a_max), 2.0 * math.sqrt(ell / a_max)


def _node_marks(waypoints: NDArray[np.float64]) -> Tuple[int, ...]:
    same = np.all(waypoints[1:] == waypoints[:-1], axis=1)
    return tuple(int(k) for k in np.flatnonzero(same))


def plan_from_waypoints(waypoints, ell: float, a_max: float) -> CorridorPlan:
    v_max, h = timing_params(ell, a_max)
    waypoints = np.asarray(waypoints, dtype=float)
    return CorridorPlan(waypoints, float(ell), h, v_max, float(a_max), _node_marks(waypoints))


def build_waypoints(path, ell: float, a_max: float) -> CorridorPlan:
    """Subdivide a polyline into equally spaced waypoints with every node duplicated.

    Segment ``s`` contributes n_s + 1 points
    ``wp_s[i] = node[s] + (i/n_s)(node[s+1] − node[s])`` with n_s = ⌈‖node[s+1] − node[s]‖ / ℓ⌉.
    The start and goal nodes are each added once more, so the sequence is
    ``node[0], wp_0[0..n_0], …, wp_{S−1}[0..n_{S−1}], node[S]``. Zero-length segments are
    collapsed first.
    """
    if not ell > 0:
        raise InvalidArgumentError(f"ℓ must be positive, got {ell}")
    nodes = np.atleast_2d(np.asarray(getattr(path, "nodes", path), dtype=float))
    if nodes.shape[0] == 0:
        raise InvalidArgumentError("Path has no nodes")

    keep = [0]
    for s in range(1, nodes.shape[0]):
        if np.linalg.norm(nodes[s] - nodes[keep[-1]]) > 0.0:
            keep.append(s)
    nodes = nodes[keep]

    points = [nodes[0]]
    for a, b in zip(nodes[:-1], nodes[1:]):
        kappa = max(1, math.ceil(np.linalg.norm(b - a) / ell - CEIL_EPS))
        for i in range(kappa + 1):
            points.append(b.copy() if i == kappa else a + (i / kappa) * (b - a))
    points.append(nodes[-1])
    plan = plan_from_waypoints(np.vstack(points), ell, a_max)
    logger.debug(f"Corridor with K={plan.K} steps over {len(nodes) - 1} segments")
    return plan


def prepend_waypoint(plan: CorridorPlan, waypoint) -> CorridorPlan:
    """Plan with one extra leading waypoint (used for the committed step of a replan)."""
    waypoint = as_point(waypoint, plan.dim)
    return plan_from_waypoints(np.vstack([waypoint, plan.waypoints]), plan.ell, plan.a_max)


def region_contains(center, ell: float, p, tol: float = 0.0) -> bool:
    """True iff ‖p − center‖∞ ≤ ℓ (closed hypercube)."""
    offset = np.asarray(p, dtype=float) - np.asarray(center, dtype=float)
    return bool(np.max(np.abs(offset), initial=0.0) <= ell + tol)


def segment_frame(a, b) -> NDArray[np.float64]:
    """Proper rotation R with R·(b − a)/‖b − a‖ = e₁."""
    direction = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    if not np.any(direction):
        raise InvalidArgumentError("Segment endpoints coincide")
    return rotation_to_world(direction).T


def step_window_ok(v, delta, plan: CorridorPlan, tol: float = ADMISSIBLE_TOL) -> bool:
    """Whether velocity ``v`` is admissible for a corridor step of displacement ``delta``.

    Per axis, with ``u = delta/ℓ`` and ``w = v/V_max``: ``w ∈ [u − 1, 1]`` when ``u ≥ 0``
    (mirrored otherwise), and ``0 ≤ w·u ≤ ‖u‖²``. The set is closed under ``straight_step``.
    """
    u = np.asarray(delta, dtype=float) / plan.ell
    w = np.asarray(v, dtype=float) / plan.v_max
    signed = np.where(u >= 0.0, w, -w)
    mag = np.abs(u)
    if np.any(signed > 1.0 + tol) or np.any(signed < mag - 1.0 - tol):
        return False
    dot = float(w @ u)
    return -tol <= dot <= float(u @ u) + tol


def _check_region(plan: CorridorPlan, k: int, p) -> None:
    if not region_contains(plan.waypoints[k], plan.ell, p, tol=plan.ell * ADMISSIBLE_TOL):
        raise InvalidArgumentError(f"Position {p} outside region {k}")


def _check_velocity(plan: CorridorPlan, v) -> None:
    if np.max(np.abs(v), initial=0.0) > plan.v_max * (1 + ADMISSIBLE_TOL):
        raise InvalidArgumentError(f"Velocity {v} exceeds V_max={plan.v_max}")


def _advance(p, v, a, h: float) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    return p + h * v + 0.5 * h * h * a, v + h * a


def straight_step(p_k, v_k, plan: CorridorPlan, k: int):
    """Constant acceleration carrying the robot from region k into region k+1 along a segment.

    Along the segment the acceleration is (ρV_max − 2v_∥)/h (ρ = spacing/ℓ); across it is
    −2v_⊥/h. Expressed in world axes this is ``a = 2Δ/h² − 2v/h``, giving
    ``p_next = p_k + Δ`` and ``v_next = 2Δ/h − v_k``.

    Returns ``(a_k, p_next, v_next)``.
    """
    if not 0 <= k < plan.K:
        raise InvalidArgumentError(f"Step index {k} outside [0, {plan.K})")
    p_k = as_point(p_k, plan.dim)
    v_k = as_point(v_k, plan.dim)
    delta = plan.step(k)
    if not np.any(delta):
        raise InvalidArgumentError(f"Waypoints {k} and {k + 1} coincide; use corner_turn")
    _check_region(plan, k, p_k)
    _check_velocity(plan, v_k)
    if not step_window_ok(v_k, delta, plan):
        raise InvalidArgumentError(f"Velocity {v_k} not admissible for step {k}")

    h = plan.h
    a_k = 2.0 * delta / (h * h) - 2.0 * v_k / h
    p_next, v_next = _advance(p_k, v_k, a_k, h)
    return a_k, p_next, v_next


def _corner_accels(x, w, f) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Normalized two-step accelerations taking (x, w) to position ``f`` and velocity ``f``."""
    lam_x1 = (x + 1.0) / 2.0
    lam_v1 = (w + 1.0) / 2.0
    lam_x2 = (lam_x1 + lam_v1) / 2.0
    lam_x3 = f / 2.0
    return 1.0 - lam_x1 / 2.0 - 1.5 * lam_v1, lam_x3 + lam_x2 - 0.5


def corner_scale(plan: CorridorPlan, k: int) -> float:
    """α = 1/‖ê‖∞ ∈ [1, √d] for the unit direction ê leaving the node at waypoint k+1."""
    out = plan.step(k + 1)
    return float(np.linalg.norm(out) / np.max(np.abs(out)))


def corner_turn(p_k, v_k, v_f: float, plan: CorridorPlan, k: int):
    """Two constant accelerations turning at a duplicated node wp[k] = wp[k+1].

    The robot ends at wp[k+1] + αV_f·ê·ℓ/V_max with velocity αV_f·ê, where ê is the unit
    direction of the outgoing segment and α = 1/‖ê‖∞, so ‖v_{k+2}‖∞ = V_f.

    Returns ``(a_k, a_k1, [state_{k+1}, state_{k+2}])``.
    """
    if not 0 <= k <= plan.K - 2:
        raise InvalidArgumentError(f"Corner index {k} needs two following steps (K={plan.K})")
    w_pts = plan.waypoints
    if not np.array_equal(w_pts[k], w_pts[k + 1]):
        raise InvalidArgumentError(f"Waypoints {k} and {k + 1} are not a duplicated node")
    if not np.any(plan.step(k + 1)):
        raise InvalidArgumentError(f"No outgoing segment after node at {k + 1}")
    p_k = as_point(p_k, plan.dim)
    v_k = as_point(v_k, plan.dim)
    _check_region(plan, k, p_k)
    _check_velocity(plan, v_k)
    alpha = corner_scale(plan, k)
    if not -ADMISSIBLE_TOL <= v_f <= plan.v_max / alpha * (1 + ADMISSIBLE_TOL):
        raise InvalidArgumentError(f"Exit speed {v_f} outside [0, V_max/α={plan.v_max / alpha}]")

    out = plan.step(k + 1)
    e_hat = out / np.linalg.norm(out)
    x = (p_k - w_pts[k]) / plan.ell
    w = v_k / plan.v_max
    f = alpha * max(v_f, 0.0) * e_hat / plan.v_max
    alpha1, alpha2 = _corner_accels(x, w, f)
    peak = float(max(np.max(np.abs(alpha1)), np.max(np.abs(alpha2))))
    if peak > 1.0 + 2.0 * ADMISSIBLE_TOL:
        raise InvalidArgumentError(f"Corner accelerations reach {peak:.6g}·A_max")
    a_k = plan.a_max * alpha1
    a_k1 = plan.a_max * alpha2

    h = plan.h
    p1, v1 = _advance(p_k, v_k, a_k, h)
    p2, v2 = _advance(p1, v1, a_k1, h)
    return a_k, a_k1, [State(p1, v1, a_k1), State(p2, v2, np.zeros(plan.dim))]


def _terminal_accels(p, v, plan: CorridorPlan):
    x = (p - plan.waypoints[-1]) / plan.ell
    w = v / plan.v_max
    alpha1, alpha2 = _corner_accels(x, w, np.zeros_like(x))
    return plan.a_max * alpha1, plan.a_max * alpha2


def witness_discrete(
    plan: CorridorPlan,
    x_start: State,
    lead_in: Optional[Sequence] = None,
) -> List[State]:
    """Feasible discrete state sequence through the corridor, built from the step constructions.

    From rest at wp[0] the chain alternates ``corner_turn`` at duplicated nodes and
    ``straight_step`` along segments, then stops at wp[K] with a two-step brake. The result is a
    certificate that the corridor QP is feasible and is used as its warm start.

    With ``lead_in`` (accelerations for the first steps, as after a replan) the rest-start
    requirement is dropped and no certificate check is made.
    """
    K, d, h = plan.K, plan.dim, plan.h
    w_pts = plan.waypoints
    if K < 0 or w_pts.ndim != 2:
        raise InvalidArgumentError("Malformed corridor plan")
    if x_start.dim != d:
        raise InvalidArgumentError(f"Start state dimension {x_start.dim} != plan dimension {d}")
    if lead_in is None:
        if not x_start.at_rest_state or not np.allclose(x_start.p, w_pts[0], rtol=0, atol=1e-12):
            raise InvalidArgumentError("Witness requires a start at rest on the first waypoint")

    p = x_start.p.copy()
    v = x_start.v.copy()
    accels = np.zeros((K + 1, d))
    positions = np.zeros((K + 1, d))
    velocities = np.zeros((K + 1, d))
    positions[0], velocities[0] = p, v

    def push(k: int, a) -> None:
        nonlocal p, v
        accels[k] = a
        p, v = _advance(p, v, a, h)
        positions[k + 1], velocities[k + 1] = p, v

    k = 0
    for a in lead_in if lead_in is not None else ():
        if k >= K:
            break
        push(k, np.asarray(a, dtype=float))
        k += 1

    while k < K:
        corner = not np.any(plan.step(k))
        if k == K - 2:
            a1, a2 = _terminal_accels(p, v, plan)
            push(k, a1)
            push(k + 1, a2)
            k += 2
        elif k == K - 1:
            push(k, np.zeros(d) if not np.any(v) else -v / h)
            k += 1
        elif corner and k <= K - 4 and np.any(plan.step(k + 1)):
            out = plan.step(k + 1)
            alpha = corner_scale(plan, k)
            v_f = (np.linalg.norm(out) / plan.ell) * plan.v_max / alpha
            a1, a2, _ = corner_turn(p, v, v_f, plan, k)
            push(k, a1)
            push(k + 1, a2)
            k += 2
        elif corner:
            push(k, -2.0 * v / h)
            k += 1
        else:
            a, _, _ = straight_step(p, v, plan, k)
            push(k, a)
            k += 1

    states = [State(positions[i], velocities[i], accels[i]) for i in range(K + 1)]
    if lead_in is None:
        _certify(plan, states)
    return states


def _certify(plan: CorridorPlan, states: List[State]) -> None:
    tol = ADMISSIBLE_TOL
    for k, state in enumerate(states):
        if not region_contains(plan.waypoints[k], plan.ell, state.p, tol=plan.ell * tol):
            raise InvalidArgumentError(f"Witness leaves region {k}")
        if not state.allowed(plan.v_max, plan.a_max, tol):
            raise InvalidArgumentError(f"Witness violates box limits at step {k}")
    final = states[-1]
    scale = plan.ell * 1e-9
    if np.max(np.abs(final.p - plan.waypoints[-1])) > scale or np.max(np.abs(final.v)) > scale:
        raise InvalidArgumentError("Witness does not stop on the final waypoint")
