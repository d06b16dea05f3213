"""Geometric helpers shared by the sampler, corridor and trajectory modules."""

from typing import Callable

import numpy as np
from numpy.typing import NDArray

from trajplan.errors import InvalidArgumentError

GOLDEN_ITERATIONS = 80
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def as_point(p, dim: int = None) -> NDArray[np.float64]:
    """Coerce ``p`` to a 1-D float array, optionally checking its dimension."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if dim is not None and arr.size != dim:
        raise InvalidArgumentError(f"Expected a {dim}-D point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"Point has non-finite coordinates: {arr}")
    return arr


def rotation_to_world(direction) -> NDArray[np.float64]:
    """Proper rotation C with C·e₁ = direction.

    The remaining columns come from a Householder QR of ``[direction | I]``, which keeps the
    orthogonality residual at machine precision for any direction.
    """
    u = np.asarray(direction, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(u))
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidArgumentError("Direction must be a non-zero finite vector")
    u = u / norm
    dim = u.size
    e1 = np.zeros(dim)
    e1[0] = 1.0
    if np.array_equal(u, e1):
        return np.eye(dim)
    if dim == 1:
        raise InvalidArgumentError("No proper 1-D rotation maps e1 onto -e1")

    q, r = np.linalg.qr(np.column_stack([u, np.eye(dim)]))
    if r[0, 0] < 0.0:
        q[:, 0] = -q[:, 0]
    if np.linalg.det(q) < 0.0:
        q[:, -1] = -q[:, -1]
    return q


def point_segment_distances(points, a, b) -> NDArray[np.float64]:
    """Euclidean distance from each row of ``points`` to the closed segment [a, b]."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    seg = np.asarray(b, dtype=float) - a
    denom = float(seg @ seg)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    lam = np.clip(((pts - a) @ seg) / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + lam[:, None] * seg), axis=1)


def point_polyline_distances(points, nodes) -> NDArray[np.float64]:
    """Distance from each point to the union of closed segments of a polyline.

    A single-node polyline degenerates to point distance.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[0] == 1:
        return np.linalg.norm(pts - nodes[0], axis=1)

    starts = nodes[:-1]
    segs = nodes[1:] - starts
    denom = np.einsum("ij,ij->i", segs, segs)
    safe = np.where(denom > 0.0, denom, 1.0)
    rel = pts[:, None, :] - starts[None, :, :]
    lam = np.einsum("nsd,sd->ns", rel, segs) / safe[None, :]
    lam = np.where(denom[None, :] > 0.0, np.clip(lam, 0.0, 1.0), 0.0)
    closest = starts[None, :, :] + lam[..., None] * segs[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2)
    return dist.min(axis=1)


def minimize_on_unit_interval(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    size: int,
    iterations: int = GOLDEN_ITERATIONS,
) -> NDArray[np.float64]:
    """Vectorized golden-section minimum of ``size`` convex functions on [0, 1].

    ``func`` maps a parameter vector of length ``size`` to the matching function values.
    Returns the minimum values, compared against both interval endpoints.
    """
    lo = np.zeros(size)
    hi = np.ones(size)
    for _ in range(iterations):
        width = hi - lo
        c = hi - _INV_PHI * width
        d = lo + _INV_PHI * width
        left = func(c) <= func(d)
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    best = func(0.5 * (lo + hi))
    best = np.minimum(best, func(np.zeros(size)))
    return np.minimum(best, func(np.ones(size)))
