"""Corridor QP assembly: jerk objective, affine dynamics maps and box/equality rows.

Decision variables are the accelerations a[0..K] of every axis. The problem separates per
axis, so each axis is stored as ``min xᵀ(WᵀW)x  s.t.  l ≤ A x ≤ u`` with a shared constraint
matrix ``A = [I; M_p[1:]; M_v[1:]]`` and axis-specific bounds.

For solving, an axis is lifted to ``z = A x``: the accelerations plus the position and
velocity deviations they produce. The rows of ``A`` become simple bounds on ``z`` and the
dense maps are replaced by the banded recurrence ``E z = 0``.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Tuple, Union

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from trajplan.corridor import CorridorPlan, State
from trajplan.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class KktResidual(NamedTuple):
    """Primal violation (SI units), relative stationarity and relative complementarity."""

    primal: float
    dual: float
    complementarity: float

    def worst(self) -> float:
        return max(self.primal, self.dual, self.complementarity)

    def within(self, tol: float) -> bool:
        return self.worst() <= tol


def difference_matrix(n: int, h: float) -> NDArray[np.float64]:
    """(n−1)×n jerk operator W: −1/h on the diagonal, 1/h on the superdiagonal."""
    w = np.zeros((max(n - 1, 0), n))
    idx = np.arange(n - 1)
    w[idx, idx] = -1.0 / h
    w[idx, idx + 1] = 1.0 / h
    return w


def jerk_hessian(K: int, d: int, h: float) -> NDArray[np.float64]:  # noqa: N803
    """Block-diagonal Hessian over ``d`` axes of WᵀW for ``K`` acceleration samples per axis."""
    if K < 2:
        raise InvalidArgumentError(f"Need at least two acceleration samples, got K={K}")
    if not h > 0:
        raise InvalidArgumentError(f"Time step must be positive, got {h}")
    w = difference_matrix(K, h)
    return np.kron(np.eye(d), w.T @ w)


def position_map(K: int, h: float) -> NDArray[np.float64]:  # noqa: N803
    """M_p with p[k] = p[0] + hk·v[0] + (M_p a)[k]; entries (h²/2)(2(k−i)−1) for i < k."""
    k = np.arange(K + 1)[:, None]
    i = np.arange(K + 1)[None, :]
    return np.where(i < k, 0.5 * h * h * (2.0 * (k - i) - 1.0), 0.0)


def velocity_map(K: int, h: float) -> NDArray[np.float64]:  # noqa: N803
    """M_v with v[k] = v[0] + (M_v a)[k]; entries h for i < k."""
    k = np.arange(K + 1)[:, None]
    i = np.arange(K + 1)[None, :]
    return np.where(i < k, h, 0.0)


def dynamics_rows(K: int, h: float) -> sp.csr_matrix:  # noqa: N803
    """2K×(3K+1) recurrence rows over z = [a[0..K]; δp[1..K]; δv[1..K]].

    Row k−1 is δv[k] − δv[k−1] − h·a[k−1] = 0 and row K+k−1 is
    δp[k] − δp[k−1] − h·δv[k−1] − (h²/2)·a[k−1] = 0, with δp[0] = δv[0] = 0.
    """
    steps = np.arange(1, K + 1)
    later = steps[1:]
    vel_rows, pos_rows = steps - 1, K + steps - 1
    rows = np.concatenate(
        [vel_rows, vel_rows, vel_rows[1:], pos_rows, pos_rows, pos_rows[1:], pos_rows[1:]]
    )
    cols = np.concatenate(
        [
            2 * K + steps,
            steps - 1,
            2 * K + later - 1,
            K + steps,
            steps - 1,
            K + later - 1,
            2 * K + later - 1,
        ]
    )
    vals = np.concatenate(
        [
            np.ones(K),
            np.full(K, -h),
            -np.ones(K - 1),
            np.ones(K),
            np.full(K, -0.5 * h * h),
            -np.ones(K - 1),
            np.full(K - 1, -h),
        ]
    )
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * K, 3 * K + 1))


@dataclass(frozen=True, eq=False)
class QpInstance:
    """Assembled corridor QP."""

    K: int
    d: int
    h: float
    axis_hessian: NDArray[np.float64]
    pos_map: NDArray[np.float64]
    vel_map: NDArray[np.float64]
    pos_offset: NDArray[np.float64]
    vel_offset: NDArray[np.float64]
    constraint_matrix: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    plan: CorridorPlan
    x_start: State
    x_goal: State

    @property
    def hessian(self) -> NDArray[np.float64]:
        return np.kron(np.eye(self.d), self.axis_hessian)

    @property
    def n_variables(self) -> int:
        return self.d * (self.K + 1)

    @property
    def n_constraints(self) -> int:
        return self.constraint_matrix.shape[0]

    def positions(self, accels) -> NDArray[np.float64]:
        return self.pos_offset + self.pos_map @ np.asarray(accels, dtype=float)

    def velocities(self, accels) -> NDArray[np.float64]:
        return self.vel_offset + self.vel_map @ np.asarray(accels, dtype=float)

    def objective(self, accels) -> float:
        acc = np.asarray(accels, dtype=float)
        return float(np.einsum("ki,kl,li->", acc, self.axis_hessian, acc))

    def axis_problem(self, axis: int):
        """(P, q, A, l, u) of axis ``axis`` in the form ½xᵀPx + qᵀx, l ≤ Ax ≤ u."""
        n = self.K + 1
        return (
            2.0 * self.axis_hessian,
            np.zeros(n),
            self.constraint_matrix,
            self.lower[:, axis],
            self.upper[:, axis],
        )

    def lift(self, accels_axis) -> NDArray[np.float64]:
        """Lifted variables z = A x of one axis' accelerations."""
        return self.constraint_matrix @ np.asarray(accels_axis, dtype=float)

    def lifted_axis_problem(self, axis: int):
        """Sparse (P, q, E, l, u) of axis ``axis``: ½zᵀPz + qᵀz, E z = 0, l ≤ z ≤ u."""
        n, rows = self.K + 1, 2 * self.K
        hessian = sp.block_diag(
            [sp.csr_matrix(2.0 * self.axis_hessian), sp.csr_matrix((rows, rows))], format="csc"
        )
        return (
            hessian,
            np.zeros(n + rows),
            dynamics_rows(self.K, self.h),
            self.lower[:, axis],
            self.upper[:, axis],
        )


def assemble(plan: CorridorPlan, x_start: State, x_goal: State) -> QpInstance:
    """Encode the corridor problem as box-constrained linear rows in the accelerations.

    Rows per axis: a[0] pinned to ``x_start.a``, a[K] pinned to ``x_goal.a`` and
    |a[k]| ≤ A_max otherwise; p[k] within wp[k] ± ℓ and |v[k]| ≤ V_max for k = 1..K−1;
    p[K] and v[K] equal to the goal.
    """
    K, d, h = plan.K, plan.dim, plan.h
    if K < 2:
        raise InvalidArgumentError(f"Corridor needs K ≥ 2 steps, got {K}")
    if x_start.dim != d or x_goal.dim != d:
        raise InvalidArgumentError("Boundary states do not match the corridor dimension")

    steps = np.arange(K + 1)[:, None]
    pos_offset = x_start.p[None, :] + h * steps * x_start.v[None, :]
    vel_offset = np.repeat(x_start.v[None, :], K + 1, axis=0)
    mp = position_map(K, h)
    mv = velocity_map(K, h)
    w = difference_matrix(K + 1, h)

    a_lo = np.full((K + 1, d), -plan.a_max)
    a_hi = np.full((K + 1, d), plan.a_max)
    a_lo[0] = a_hi[0] = x_start.a
    a_lo[K] = a_hi[K] = x_goal.a

    p_lo = plan.waypoints[1:] - plan.ell - pos_offset[1:]
    p_hi = plan.waypoints[1:] + plan.ell - pos_offset[1:]
    p_lo[-1] = p_hi[-1] = x_goal.p - pos_offset[K]

    v_lo = -plan.v_max - vel_offset[1:]
    v_hi = plan.v_max - vel_offset[1:]
    v_lo[-1] = v_hi[-1] = x_goal.v - vel_offset[K]

    instance = QpInstance(
        K=K,
        d=d,
        h=h,
        axis_hessian=w.T @ w,
        pos_map=mp,
        vel_map=mv,
        pos_offset=pos_offset,
        vel_offset=vel_offset,
        constraint_matrix=np.vstack([np.eye(K + 1), mp[1:], mv[1:]]),
        lower=np.vstack([a_lo, p_lo, v_lo]),
        upper=np.vstack([a_hi, p_hi, v_hi]),
        plan=plan,
        x_start=x_start,
        x_goal=x_goal,
    )
    logger.debug(
        f"Assembled QP: {instance.n_variables} variables, {d * instance.n_constraints} rows"
    )
    return instance


def axis_kkt(P, q, A, lower, upper, x, y) -> Tuple[float, float, float]:  # noqa: N803
    """KKT residuals of ``½xᵀPx + qᵀx, l ≤ Ax ≤ u`` with multipliers ``y``.

    Sign convention: y > 0 on an active upper bound, y < 0 on an active lower bound.
    """
    r = A @ x
    primal = float(max(np.max(r - upper, initial=0.0), np.max(lower - r, initial=0.0), 0.0))
    px = P @ x
    aty = A.T @ y
    scale = max(1.0, np.max(np.abs(px), initial=0.0), np.max(np.abs(aty), initial=0.0))
    dual = float(np.max(np.abs(px + q + aty), initial=0.0) / scale)
    equality = upper - lower <= 0.0
    gap = np.maximum(y, 0.0) * np.maximum(upper - r, 0.0) + np.maximum(-y, 0.0) * np.maximum(
        r - lower, 0.0
    )
    gap = np.where(equality, 0.0, gap)
    comp = float(np.max(gap, initial=0.0) / max(1.0, np.max(np.abs(y), initial=0.0)))
    return primal, dual, comp


def kkt_residual(inst: QpInstance, sol) -> KktResidual:
    """Worst KKT residuals over all axes of ``sol`` for ``inst``."""
    acc = np.asarray(sol.accelerations, dtype=float)
    duals = np.asarray(sol.duals, dtype=float)
    worst = np.zeros(3)
    for axis in range(inst.d):
        P, q, A, lo, hi = inst.axis_problem(axis)  # noqa: N806
        worst = np.maximum(worst, axis_kkt(P, q, A, lo, hi, acc[:, axis], duals[:, axis]))
    return KktResidual(float(worst[0]), float(worst[1]), float(worst[2]))


def dump_instance(inst: QpInstance, directory: Union[str, Path]) -> Path:
    """Write H, A and per-axis bounds as whitespace text matrices for external solvers.

    Files: ``hessian.txt`` (full d(K+1) square, variables axis-major), ``constraints.txt``
    (shared per-axis rows), ``lower.txt``/``upper.txt`` (one column per axis).
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "hessian.txt", inst.hessian, fmt="%.17g")
    np.savetxt(out / "constraints.txt", inst.constraint_matrix, fmt="%.17g")
    np.savetxt(out / "lower.txt", inst.lower, fmt="%.17g")
    np.savetxt(out / "upper.txt", inst.upper, fmt="%.17g")
    return out
