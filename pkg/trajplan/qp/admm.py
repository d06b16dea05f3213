"""Corridor QP solver: primal active set from the witness, operator splitting otherwise.

Each axis is solved in the lifted form of ``QpInstance.lifted_axis_problem``: accelerations
plus the position and velocity deviations they produce, tied by banded recurrence rows, so
every factorization is a sparse LU.

With a feasible warm start (normally the witness) the active-set method of
``trajplan.qp.active_set`` walks from it to an exact KKT point. Without one, the ADMM
iteration of OSQP runs (Ruiz equilibration, over-relaxation, per-row step sizes and adaptive
ρ); whenever the iterate meets the current ADMM tolerance the active set is guessed from
(z, y) and the equality-constrained KKT system is solved exactly. If ADMM stalls and the
corridor witness can be built, the active-set method finishes from it.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from trajplan.corridor import witness_discrete
from trajplan.errors import InvalidArgumentError
from trajplan.qp.active_set import ActiveSetParams, kkt_solve, solve_bounded, start_violation
from trajplan.qp.problem import KktResidual, QpInstance, axis_kkt, kkt_residual

logger = logging.getLogger(__name__)

MIN_SCALING = 1e-4
MAX_SCALING = 1e4


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class AdmmParams:
    """Tuning constants of the splitting iteration."""

    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    equality_rho_scale: float = 1e3
    rho_min: float = 1e-6
    rho_max: float = 1e6
    adaptive_rho_tolerance: float = 5.0
    scaling_iterations: int = 10
    check_every: int = 25
    eps_start: float = 1e-3
    eps_prim_inf: float = 1e-7
    polish_delta: float = 1e-9
    polish_refine_iter: int = 5


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Accelerations (K+1, d), duals (rows, d) and solver diagnostics."""

    accelerations: NDArray[np.float64]
    objective: float
    status: SolveStatus
    residuals: KktResidual
    duals: NDArray[np.float64]
    iterations: int
    polished: bool

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


@dataclass
class _AxisResult:
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    status: SolveStatus
    iterations: int
    polished: bool
    worst: float


def _finish(best, status: SolveStatus, iterations: int) -> _AxisResult:
    worst, x, y, polished = best
    return _AxisResult(x, y, status, iterations, polished, worst)


def _limit(values: NDArray[np.float64]) -> NDArray[np.float64]:
    values = np.where(values < MIN_SCALING, 1.0, values)
    return np.minimum(values, MAX_SCALING)


def _abs_max(M, axis: int) -> NDArray[np.float64]:  # noqa: N803
    return abs(M).max(axis=axis).toarray().ravel()


def _ruiz_equilibrate(P, q, A, iterations: int):  # noqa: N803
    """Diagonal scalings D, E and cost factor c with P̄ = cDPD, q̄ = cDq, Ā = EAD."""
    n, m = P.shape[0], A.shape[0]
    D, E, c = np.ones(n), np.ones(m), 1.0  # noqa: N806
    Ps, qs, As = P.copy(), q.copy(), A.copy()  # noqa: N806
    for _ in range(iterations):
        col = np.maximum(_abs_max(Ps, 0), _abs_max(As, 0))
        row = _abs_max(As, 1)
        d_step = 1.0 / np.sqrt(_limit(col))
        e_step = 1.0 / np.sqrt(_limit(row))
        Ps = sp.diags(d_step) @ Ps @ sp.diags(d_step)  # noqa: N806
        As = sp.diags(e_step) @ As @ sp.diags(d_step)  # noqa: N806
        qs = d_step * qs
        D *= d_step
        E *= e_step

        cost_norm = max(float(np.mean(_abs_max(Ps, 0))), float(np.max(np.abs(qs))))
        gamma = 1.0 / float(_limit(np.array([cost_norm]))[0])
        Ps = gamma * Ps  # noqa: N806
        qs = gamma * qs
        c *= gamma
    return D, E, c, Ps.tocsc(), qs, As.tocsc()


def _rho_vector(rho: float, equality: NDArray[np.bool_], params: AdmmParams):
    return np.where(equality, rho * params.equality_rho_scale, rho)


def _factor(Ps, As, rho_vec, sigma: float):  # noqa: N803
    n = Ps.shape[0]
    matrix = Ps + sigma * sp.identity(n) + As.T @ sp.diags(rho_vec) @ As
    return splu(sp.csc_matrix(matrix))


def _primal_infeasible(A, lower, upper, dy, eps: float) -> bool:  # noqa: N803
    norm = float(np.max(np.abs(dy), initial=0.0))
    if norm <= 1e-12:
        return False
    dy = dy / norm
    if np.max(np.abs(A.T @ dy)) > eps:
        return False
    support = upper @ np.maximum(dy, 0.0) + lower @ np.minimum(dy, 0.0)
    return bool(support < -eps)


def _polish(Ps, qs, As, ls, us, z, y, equality, params: AdmmParams):  # noqa: N803
    """Solve the KKT system of the guessed active set; None if it is numerically unusable."""
    n, m = Ps.shape[0], As.shape[0]
    lower = equality | (z - ls < -y)
    upper = ~lower & (us - z < y)
    active = np.flatnonzero(lower | upper)
    target = np.where(lower, ls, us)[active]
    sol = kkt_solve(
        Ps,
        sp.csr_matrix(As)[active].tocsc(),
        np.concatenate([-qs, target]),
        params.polish_delta,
        params.polish_refine_iter,
    )
    if sol is None:
        return None
    y_pol = np.zeros(m)
    y_pol[active] = sol[n:]
    return sol[:n], y_pol


def solve_axis(
    P, q, A, lower, upper,  # noqa: N803
    x0: Optional[NDArray[np.float64]] = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    params: AdmmParams = AdmmParams(),
) -> _AxisResult:
    """Solve ``min ½xᵀPx + qᵀx s.t. l ≤ Ax ≤ u`` by ADMM; dense or sparse P and A."""
    P, A = sp.csc_matrix(P, dtype=float), sp.csc_matrix(A, dtype=float)  # noqa: N806
    q = np.asarray(q, dtype=float)
    n = P.shape[0]
    D, E, c, Ps, qs, As = _ruiz_equilibrate(P, q, A, params.scaling_iterations)  # noqa: N806
    ls, us = E * lower, E * upper
    equality = (upper - lower) <= 0.0

    rho = params.rho
    rho_vec = _rho_vector(rho, equality, params)
    factor = _factor(Ps, As, rho_vec, params.sigma)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float) / D
    z = np.clip(As @ x, ls, us)
    y = np.zeros(A.shape[0])
    eps = max(params.eps_start, tol)
    best: Tuple[float, NDArray[np.float64], NDArray[np.float64], bool] = (np.inf, D * x, y, False)

    def unscale(xs, ys):
        return D * xs, E * ys / c

    def candidate(xs, ys, polished: bool):
        nonlocal best
        xu, yu = unscale(xs, ys)
        worst = max(axis_kkt(P, q, A, lower, upper, xu, yu))
        if worst < best[0]:
            best = (worst, xu, yu, polished)
        return worst

    iteration = 0
    for iteration in range(1, max_iter + 1):
        rhs = params.sigma * x - qs + As.T @ (rho_vec * z - y)
        x_tilde = factor.solve(rhs)
        z_tilde = As @ x_tilde
        x = params.alpha * x_tilde + (1.0 - params.alpha) * x
        z_relaxed = params.alpha * z_tilde + (1.0 - params.alpha) * z
        z_next = np.clip(z_relaxed + y / rho_vec, ls, us)
        y_next = y + rho_vec * (z_relaxed - z_next)
        dy = y_next - y
        z, y = z_next, y_next

        if iteration % params.check_every and iteration != max_iter:
            continue

        ax = As @ x
        px = Ps @ x
        aty = As.T @ y
        r_prim = np.max(np.abs((ax - z) / E))
        r_dual = np.max(np.abs((px + qs + aty) / D)) / c
        eps_prim = eps + eps * max(np.max(np.abs(ax / E)), np.max(np.abs(z / E)))
        eps_dual = eps + eps * max(
            np.max(np.abs(px / D)), np.max(np.abs(aty / D)), np.max(np.abs(qs / D), initial=0.0)
        ) / c

        if r_prim <= eps_prim and r_dual <= eps_dual:
            polished = _polish(Ps, qs, As, ls, us, z, y, equality, params)
            if polished is not None and candidate(*polished, polished=True) <= tol:
                return _finish(best, SolveStatus.OPTIMAL, iteration)
            if candidate(x, y, polished=False) <= tol:
                return _finish(best, SolveStatus.OPTIMAL, iteration)
            eps = max(0.1 * eps, tol)
        elif _primal_infeasible(A, lower, upper, E * dy, params.eps_prim_inf):
            xu, yu = unscale(x, y)
            logger.debug(f"Primal infeasibility certificate after {iteration} iterations")
            return _AxisResult(xu, yu, SolveStatus.INFEASIBLE, iteration, False, np.inf)

        prim_scale = max(np.max(np.abs(ax)), np.max(np.abs(z)), 1e-30)
        dual_scale = max(np.max(np.abs(px)), np.max(np.abs(aty)), np.max(np.abs(qs)), 1e-30)
        ratio = (np.max(np.abs(ax - z)) / prim_scale) / (
            np.max(np.abs(px + qs + aty)) / dual_scale + 1e-30
        )
        rho_new = float(np.clip(rho * np.sqrt(ratio), params.rho_min, params.rho_max))
        tol_factor = params.adaptive_rho_tolerance
        if rho_new > tol_factor * rho or rho_new < rho / tol_factor:
            rho = rho_new
            rho_vec = _rho_vector(rho, equality, params)
            factor = _factor(Ps, As, rho_vec, params.sigma)

    polished = _polish(Ps, qs, As, ls, us, z, y, equality, params)
    if polished is not None:
        candidate(*polished, polished=True)
    candidate(x, y, polished=False)
    status = SolveStatus.OPTIMAL if best[0] <= tol else SolveStatus.MAX_ITERATIONS
    return _finish(best, status, iteration)


def _lifted_admm(P, q, E, lower, upper, z0, tol, max_iter, params) -> _AxisResult:  # noqa: N803
    """ADMM on the lifted axis with the recurrence rows stacked under the bound rows."""
    n, rows = P.shape[0], E.shape[0]
    stacked = sp.vstack([sp.identity(n, format="csr"), E], format="csc")
    zeros = np.zeros(rows)
    result = solve_axis(
        P,
        q,
        stacked,
        np.concatenate([lower, zeros]),
        np.concatenate([upper, zeros]),
        x0=z0,
        tol=tol,
        max_iter=max_iter,
        params=params,
    )
    result.y = result.y[:n]
    return result


def _lifted_active_set(
    P, q, E, lower, upper, z0, tol, max_iter, params  # noqa: N803
) -> _AxisResult:
    result = solve_bounded(
        P, q, E, np.zeros(E.shape[0]), lower, upper, z0, tol=tol, max_iter=max_iter, params=params
    )
    status = SolveStatus.OPTIMAL if result.converged else SolveStatus.MAX_ITERATIONS
    return _AxisResult(
        result.x, result.y, status, result.iterations, True, 0.0 if result.converged else np.inf
    )


def _witness_accels(inst: QpInstance) -> Optional[NDArray[np.float64]]:
    try:
        return np.array([s.a for s in witness_discrete(inst.plan, inst.x_start)])
    except InvalidArgumentError as e:
        logger.debug(f"No witness to restart from: {e}")
        return None


def solve(
    inst: QpInstance,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    warm_start=None,
    params: AdmmParams = AdmmParams(),
    active_set: ActiveSetParams = ActiveSetParams(),
) -> QpSolution:
    """Solve the corridor QP axis by axis.

    ``warm_start`` is an optional (K+1, d) acceleration sequence, typically the witness. A
    feasible warm start is improved by the active-set method and is never returned worse;
    an infeasible one seeds ADMM. ``max_iter`` caps the iterations of each axis.
    """
    n = inst.K + 1
    warm = None
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float).reshape(n, inst.d)
    restart: Optional[NDArray[np.float64]] = None
    restart_built = False

    accels = np.zeros((n, inst.d))
    duals = np.zeros((inst.n_constraints, inst.d))
    statuses = []
    iterations = 0
    polished = True
    for axis in range(inst.d):
        P, q, E, lo, hi = inst.lifted_axis_problem(axis)  # noqa: N806
        rows = np.zeros(E.shape[0])
        z0 = None if warm is None else inst.lift(warm[:, axis])
        if z0 is not None and start_violation(E, rows, lo, hi, z0) <= active_set.start_tol:
            result = _lifted_active_set(P, q, E, lo, hi, z0, tol, max_iter, active_set)
        else:
            result = _lifted_admm(P, q, E, lo, hi, z0, tol, max_iter, params)
            if result.status == SolveStatus.MAX_ITERATIONS:
                if not restart_built:
                    restart, restart_built = _witness_accels(inst), True
                z_w = None if restart is None else inst.lift(restart[:, axis])
                usable = z_w is not None and (
                    start_violation(E, rows, lo, hi, z_w) <= active_set.start_tol
                )
                if usable:
                    logger.info(f"ADMM stalled on axis {axis}; finishing from the witness")
                    spent = result.iterations
                    result = _lifted_active_set(P, q, E, lo, hi, z_w, tol, max_iter, active_set)
                    result.iterations += spent

        # variables fixed by equal bounds are returned at their exact value
        fixed = lo[:n] == hi[:n]
        accels[:, axis] = np.where(fixed, lo[:n], result.x[:n])
        duals[:, axis] = result.y
        statuses.append(result.status)
        iterations += result.iterations
        polished = polished and result.polished

    if SolveStatus.INFEASIBLE in statuses:
        status = SolveStatus.INFEASIBLE
    elif all(s == SolveStatus.OPTIMAL for s in statuses):
        status = SolveStatus.OPTIMAL
    else:
        status = SolveStatus.MAX_ITERATIONS

    solution = QpSolution(
        accelerations=accels,
        objective=inst.objective(accels),
        status=status,
        residuals=KktResidual(0.0, 0.0, 0.0),
        duals=duals,
        iterations=iterations,
        polished=polished,
    )
    residuals = kkt_residual(inst, solution)
    if status == SolveStatus.OPTIMAL and not residuals.within(tol):
        logger.warning(f"Axis solutions miss the KKT tolerance: {residuals.worst():.2e}")
        status = SolveStatus.MAX_ITERATIONS
    solution = replace(solution, residuals=residuals, status=status)
    logger.info(
        f"QP {status.value}: {inst.n_variables} variables, {iterations} iterations, "
        f"max residual {residuals.worst():.2e}"
    )
    return solution
