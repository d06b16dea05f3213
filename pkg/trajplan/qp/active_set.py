"""Primal active-set method for convex QPs with equality rows and simple bounds.

Solves ``min ½xᵀPx + qᵀx  s.t.  Ex = b,  l ≤ x ≤ u`` from a feasible starting point. The
working set holds the bounds currently treated as equalities. Each iteration minimizes over
the face they define with one sparse KKT solve, then steps as far as the remaining bounds
allow: a blocking bound joins the working set, and at a face minimizer the bounds whose
multipliers have the wrong sign leave it. Iterates stay feasible and the objective never
increases, so an early stop still returns a point no worse than the start.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActiveSetParams:
    """Constants of the active-set iteration."""

    delta: float = 1e-10  # KKT regularization, relative to the largest Hessian entry
    refine_iter: int = 4
    start_tol: float = 1e-7  # largest constraint violation of a usable starting point
    dual_scale: float = 1e-3  # multipliers are sign-checked at dual_scale · tol


@dataclass
class BoundedQpResult:
    """Solution, bound multipliers (> 0 on an active upper bound) and row multipliers."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]
    lam: NDArray[np.float64]
    converged: bool
    iterations: int


def kkt_solve(
    P, A, rhs, delta: float, refine_iter: int  # noqa: N803
) -> Optional[NDArray[np.float64]]:
    """Solve ``[[P, Aᵀ], [A, 0]] s = rhs`` through a δ-regularized sparse LU.

    Iterative refinement against the unregularized matrix recovers the exact solution of a
    consistent system. Returns None when the factorization fails or the result is not finite.
    """
    n, m = P.shape[0], A.shape[0]
    if m:
        kkt = sp.bmat([[P, A.T], [A, None]], format="csc")
    else:
        kkt = sp.csc_matrix(P)
    shift = sp.diags(np.concatenate([np.full(n, delta), np.full(m, -delta)]))
    try:
        lu = splu((kkt + shift).tocsc())
    except RuntimeError as e:
        logger.debug(f"KKT factorization failed: {e}")
        return None
    sol = lu.solve(rhs)
    for _ in range(refine_iter):
        sol = sol + lu.solve(rhs - kkt @ sol)
    if not np.all(np.isfinite(sol)):
        return None
    return sol


def start_violation(E, b, lower, upper, x) -> float:  # noqa: N803
    """Largest violation of ``Ex = b`` and ``l ≤ x ≤ u`` at ``x``."""
    x = np.asarray(x, dtype=float)
    bounds = max(np.max(lower - x, initial=0.0), np.max(x - upper, initial=0.0))
    rows = np.max(np.abs(E @ x - b), initial=0.0)
    return float(max(bounds, rows, 0.0))


def _face_step(
    P, E, g, free: NDArray[np.bool_], delta: float, refine_iter: int  # noqa: N803
) -> Optional[Tuple[NDArray[np.float64], NDArray[np.float64]]]:
    """Offset to the minimizer of the face that fixes ``~free``, and the row multipliers there."""
    n = P.shape[0]
    keep = sp.diags(free.astype(float))
    face_p = keep @ P @ keep + sp.diags((~free).astype(float))
    face_e = (E @ keep).tocsc()
    sol = kkt_solve(
        face_p.tocsc(),
        face_e,
        np.concatenate([-np.where(free, g, 0.0), np.zeros(E.shape[0])]),
        delta,
        refine_iter,
    )
    if sol is None:
        return None
    d = np.where(free, sol[:n], 0.0)
    return d, sol[n:]


def _ratio_test(x, d, lower, upper, free) -> Tuple[float, NDArray[np.int_]]:
    """Largest feasible step length in [0, 1] along ``d`` and the bounds that block it."""
    size = np.max(np.abs(d))
    moving = free & (np.abs(d) > 1e-12 * size)
    limit = np.full(x.shape, np.inf)
    down = moving & (d < 0.0)
    up = moving & (d > 0.0)
    limit[down] = (lower[down] - x[down]) / d[down]
    limit[up] = (upper[up] - x[up]) / d[up]
    limit = np.maximum(limit, 0.0)
    alpha = float(min(1.0, np.min(limit, initial=np.inf)))
    if alpha >= 1.0:
        return 1.0, np.array([], dtype=int)
    return alpha, np.flatnonzero(limit <= alpha)


def solve_bounded(
    P, q, E, b, lower, upper, x0,  # noqa: N803
    tol: float = 1e-8,
    max_iter: int = 10_000,
    params: ActiveSetParams = ActiveSetParams(),
) -> BoundedQpResult:
    """Minimize ``½xᵀPx + qᵀx`` subject to ``Ex = b``, ``l ≤ x ≤ u`` starting from ``x0``.

    ``x0`` must be feasible within ``params.start_tol``; it is clipped onto the bounds first.
    Bounds with ``l == u`` stay fixed throughout.

    Raises ValueError when ``x0`` is not feasible.
    """
    P = sp.csc_matrix(P, dtype=float)  # noqa: N806
    E = sp.csr_matrix(E, dtype=float)  # noqa: N806
    q = np.asarray(q, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    violation = start_violation(E, b, lower, upper, x0)
    if violation > params.start_tol:
        raise ValueError(f"Starting point violates the constraints by {violation:.2e}")

    n = P.shape[0]
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    pinned = upper - lower <= 0.0
    fixed = pinned.copy()
    at_upper = np.zeros(n, dtype=bool)
    delta = params.delta * max(1.0, float(abs(P).max()) if P.nnz else 1.0)
    lam = np.zeros(E.shape[0])
    y = np.zeros(n)
    release_all = True
    released = np.zeros(n, dtype=bool)

    for iteration in range(1, max_iter + 1):
        g = P @ x + q
        step = _face_step(P, E, g, ~fixed, delta, params.refine_iter)
        if step is None:
            logger.warning(f"Active-set KKT solve failed at iteration {iteration}")
            return BoundedQpResult(x, y, lam, False, iteration)
        d, lam = step

        if np.max(np.abs(d), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            alpha, blocking = _ratio_test(x, d, lower, upper, ~fixed)
            x = np.clip(x + alpha * d, lower, upper)
            if blocking.size:
                towards_upper = d[blocking] > 0.0
                fixed[blocking] = True
                at_upper[blocking] = towards_upper
                x[blocking] = np.where(towards_upper, upper[blocking], lower[blocking])
                # releasing several bounds at once can cycle through zero-length steps
                if alpha <= 0.0 and np.any(released[blocking]):
                    release_all = False
                released[:] = False
                continue

        g = P @ x + q
        y = np.where(fixed, -(g + E.T @ lam), 0.0)
        dual_tol = params.dual_scale * tol * max(1.0, float(np.max(np.abs(g), initial=0.0)))
        wrong = fixed & ~pinned & np.where(at_upper, y < -dual_tol, y > dual_tol)
        if not wrong.any():
            logger.debug(f"Active set converged after {iteration} iterations, {fixed.sum()} bounds")
            return BoundedQpResult(x, y, lam, True, iteration)
        if release_all:
            released = wrong
        else:
            released = np.zeros(n, dtype=bool)
            released[np.argmax(np.where(wrong, np.abs(y), 0.0))] = True
        fixed &= ~released
        y = np.where(fixed, y, 0.0)

    logger.warning(f"Active set stopped at the {max_iter} iteration cap")
    return BoundedQpResult(x, y, lam, False, max_iter)
