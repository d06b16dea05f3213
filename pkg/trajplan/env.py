"""Workspace and obstacle model with collision and clearance queries.

Obstacles are closed sets: a point on an obstacle boundary is in collision. The planning
environment is the raw environment inflated by a margin; ``Environment.inflation`` records
the accumulated margin and shrinks the usable workspace by the same amount.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from trajplan.errors import InvalidArgumentError
from trajplan.geometry import minimize_on_unit_interval, point_segment_distances

logger = logging.getLogger(__name__)


def _coords(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=float).reshape(-1))


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box the robot operates in."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower, upper = _coords(self.lower), _coords(self.upper)
        if len(lower) != len(upper) or len(lower) not in (2, 3):
            raise InvalidArgumentError(
                f"Workspace bounds must be 2-D or 3-D, got {len(lower)} and {len(upper)}"
            )
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise InvalidArgumentError(f"Workspace lower {lower} must be below upper {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def extents(self) -> NDArray[np.float64]:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def floor_area(self) -> float:
        return float(np.prod(self.extents[:-1]))


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _coords(self.center))
        if not self.radius > 0:
            raise InvalidArgumentError(f"Sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    def grown(self, margin: float) -> "Sphere":
        return Sphere(self.center, self.radius + margin)

    def volume(self) -> float:
        return float(_ball_volume(self.dim) * self.radius**self.dim)


@dataclass(frozen=True)
class Cylinder:
    """Vertical capped cylinder standing on ``base`` (the centre of its bottom disc).

    In a 2-D workspace the cylinder is a disc and its height is ignored.
    """

    base: Tuple[float, ...]
    radius: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "base", _coords(self.base))
        if not self.radius > 0 or not self.height > 0:
            raise InvalidArgumentError(
                f"Cylinder radius and height must be positive, got {self.radius}, {self.height}"
            )
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))

    @property
    def dim(self) -> int:
        return len(self.base)

    def grown(self, margin: float) -> "Cylinder":
        """Radius and both caps grown by ``margin``; covers the ball-swept cylinder even when the
        base is off the floor."""
        if self.dim == 2:
            return Cylinder(self.base, self.radius + margin, self.height)
        base = self.base[:-1] + (self.base[-1] - margin,)
        return Cylinder(base, self.radius + margin, self.height + 2.0 * margin)

    def volume(self) -> float:
        if self.dim == 2:
            return float(np.pi * self.radius**2)
        return float(np.pi * self.radius**2 * self.height)


@dataclass(frozen=True)
class Box:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower, upper = _coords(self.lower), _coords(self.upper)
        if len(lower) != len(upper) or not all(lo < hi for lo, hi in zip(lower, upper)):
            raise InvalidArgumentError(f"Box lower {lower} must be below upper {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def grown(self, margin: float) -> "Box":
        return Box(
            tuple(v - margin for v in self.lower), tuple(v + margin for v in self.upper)
        )

    def volume(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))


Obstacle = Union[Sphere, Cylinder, Box]


def _ball_volume(dim: int) -> float:
    return {1: 2.0, 2: np.pi, 3: 4.0 * np.pi / 3.0}[dim]


@dataclass(frozen=True)
class _Packed:
    """Obstacle parameters stacked per primitive for vectorized queries."""

    sph_c: NDArray[np.float64]
    sph_r: NDArray[np.float64]
    cyl_xy: NDArray[np.float64]
    cyl_r: NDArray[np.float64]
    cyl_zlo: NDArray[np.float64]
    cyl_zhi: NDArray[np.float64]
    box_lo: NDArray[np.float64]
    box_hi: NDArray[np.float64]

    @property
    def count(self) -> int:
        return self.sph_r.size + self.cyl_r.size + self.box_lo.shape[0]


@dataclass(frozen=True)
class Environment:
    """Workspace plus obstacles; ``inflation`` is the margin already applied to both."""

    workspace: Workspace
    obstacles: Tuple[Obstacle, ...] = field(default_factory=tuple)
    inflation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for obstacle in self.obstacles:
            if obstacle.dim != self.workspace.dim:
                raise InvalidArgumentError(
                    f"Obstacle {obstacle} does not match workspace dimension {self.workspace.dim}"
                )
        if self.inflation < 0:
            raise InvalidArgumentError(f"Inflation must be non-negative, got {self.inflation}")

    @property
    def dim(self) -> int:
        return self.workspace.dim

    @property
    def free_lower(self) -> NDArray[np.float64]:
        return np.asarray(self.workspace.lower) + self.inflation

    @property
    def free_upper(self) -> NDArray[np.float64]:
        return np.asarray(self.workspace.upper) - self.inflation

    @cached_property
    def packed(self) -> _Packed:
        d = self.dim
        spheres = [o for o in self.obstacles if isinstance(o, Sphere)]
        cylinders = [o for o in self.obstacles if isinstance(o, Cylinder)]
        boxes = [o for o in self.obstacles if isinstance(o, Box)]
        planar = d - 1 if d == 3 else d
        cyl_base = np.array([c.base for c in cylinders], dtype=float).reshape(-1, d)
        if d == 3:
            zlo = cyl_base[:, -1]
            zhi = zlo + np.array([c.height for c in cylinders], dtype=float)
        else:
            zlo = np.full(len(cylinders), -np.inf)
            zhi = np.full(len(cylinders), np.inf)
        return _Packed(
            sph_c=np.array([s.center for s in spheres], dtype=float).reshape(-1, d),
            sph_r=np.array([s.radius for s in spheres], dtype=float),
            cyl_xy=cyl_base[:, :planar],
            cyl_r=np.array([c.radius for c in cylinders], dtype=float),
            cyl_zlo=zlo,
            cyl_zhi=zhi,
            box_lo=np.array([b.lower for b in boxes], dtype=float).reshape(-1, d),
            box_hi=np.array([b.upper for b in boxes], dtype=float).reshape(-1, d),
        )

    def obstacle_volume(self) -> float:
        return float(sum(o.volume() for o in self.obstacles))


# ---------------------------------------------------------------------------
# Signed distances (broadcasting over points and obstacle parameters)
# ---------------------------------------------------------------------------


def _sphere_sd(points, centers, radii):
    return np.linalg.norm(points - centers, axis=-1) - radii


def _cylinder_sd(points, xy, radii, zlo, zhi):
    planar = xy.shape[-1]
    dr = np.linalg.norm(points[..., :planar] - xy, axis=-1) - radii
    if points.shape[-1] == planar:
        return dr
    z = points[..., -1]
    dz = np.maximum(zlo - z, z - zhi)
    outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
    return np.where((dr <= 0.0) & (dz <= 0.0), np.maximum(dr, dz), outside)


def _box_sd(points, lo, hi):
    q = np.maximum(lo - points, points - hi)
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    return outside + np.minimum(q.max(axis=-1), 0.0)


def signed_distances(env: Environment, points) -> NDArray[np.float64]:
    """Signed distance from each point to each obstacle, shape (N, n_obstacles).

    Columns are ordered spheres, cylinders, boxes.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))[:, None, :]
    pk = env.packed
    parts = [
        _sphere_sd(pts, pk.sph_c[None], pk.sph_r[None]),
        _cylinder_sd(pts, pk.cyl_xy[None], pk.cyl_r[None], pk.cyl_zlo[None], pk.cyl_zhi[None]),
        _box_sd(pts, pk.box_lo[None], pk.box_hi[None]),
    ]
    return np.concatenate(parts, axis=1)


def _inside_free_bounds(env: Environment, points) -> NDArray[np.bool_]:
    pts = np.atleast_2d(points)
    return np.all((pts >= env.free_lower) & (pts <= env.free_upper), axis=1)


def points_free(env: Environment, points) -> NDArray[np.bool_]:
    """Vectorized ``point_free``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    free = _inside_free_bounds(env, pts)
    if env.packed.count:
        free &= np.all(signed_distances(env, pts) > 0.0, axis=1)
    return free


def point_free(env: Environment, p) -> bool:
    """True iff ``p`` lies in the usable workspace and strictly outside every obstacle."""
    return bool(points_free(env, p)[0])


def clearances(env: Environment, points) -> NDArray[np.float64]:
    """Vectorized ``clearance``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if env.packed.count == 0:
        return np.minimum(pts - env.free_lower, env.free_upper - pts).min(axis=1)
    return signed_distances(env, pts).min(axis=1)


def clearance(env: Environment, p) -> float:
    """Signed distance from ``p`` to the nearest obstacle surface (negative inside).

    Without obstacles, the distance to the usable workspace boundary is returned.
    """
    return float(clearances(env, p)[0])


# ---------------------------------------------------------------------------
# Segment queries
# ---------------------------------------------------------------------------


def _aabb_overlap(lo, hi, seg_lo, seg_hi) -> NDArray[np.bool_]:
    return np.all((lo <= seg_hi) & (hi >= seg_lo), axis=-1)


def _segment_hits_spheres(a, d, centers, radii):
    dist = np.array([point_segment_distances(c[None], a, a + d)[0] for c in centers])
    return dist <= radii


def _segment_hits_cylinders(a, d, xy, radii, zlo, zhi):
    planar = xy.shape[1]
    n = radii.size
    if a.size == planar:
        tlo, thi = np.zeros(n), np.ones(n)
    else:
        az, dz = a[-1], d[-1]
        if dz == 0.0:
            inside = (zlo <= az) & (az <= zhi)
            tlo = np.where(inside, 0.0, 1.0)
            thi = np.where(inside, 1.0, 0.0)
        else:
            t0, t1 = (zlo - az) / dz, (zhi - az) / dz
            tlo = np.maximum(np.minimum(t0, t1), 0.0)
            thi = np.minimum(np.maximum(t0, t1), 1.0)
    hits = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(tlo <= thi):
        p0 = a[:planar] + tlo[i] * d[:planar]
        p1 = a[:planar] + thi[i] * d[:planar]
        hits[i] = point_segment_distances(xy[i][None], p0, p1)[0] <= radii[i]
    return hits


def _segment_hits_boxes(a, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - a) / d
        t1 = (hi - a) / d
    moving = d != 0.0
    inside = (lo <= a) & (a <= hi)
    tmin = np.where(moving, np.minimum(t0, t1), np.where(inside, -np.inf, np.inf))
    tmax = np.where(moving, np.maximum(t0, t1), np.where(inside, np.inf, -np.inf))
    enter = np.maximum(tmin.max(axis=1), 0.0)
    leave = np.minimum(tmax.min(axis=1), 1.0)
    return enter <= leave


def segment_free(env: Environment, a, b) -> bool:
    """True iff the closed segment [a, b] stays in the usable workspace and misses every obstacle.

    Exact closed-form tests after an axis-aligned bounding-box broad phase.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not _inside_free_bounds(env, np.vstack([a, b])).all():
        return False
    pk = env.packed
    if pk.count == 0:
        return True
    d = b - a
    seg_lo, seg_hi = np.minimum(a, b), np.maximum(a, b)

    if pk.sph_r.size:
        near = _aabb_overlap(
            pk.sph_c - pk.sph_r[:, None], pk.sph_c + pk.sph_r[:, None], seg_lo, seg_hi
        )
        if near.any() and _segment_hits_spheres(a, d, pk.sph_c[near], pk.sph_r[near]).any():
            return False

    if pk.cyl_r.size:
        planar = pk.cyl_xy.shape[1]
        near = _aabb_overlap(
            pk.cyl_xy - pk.cyl_r[:, None], pk.cyl_xy + pk.cyl_r[:, None],
            seg_lo[:planar], seg_hi[:planar],
        )
        if planar < env.dim:
            near &= (pk.cyl_zlo <= seg_hi[-1]) & (pk.cyl_zhi >= seg_lo[-1])
        if near.any() and _segment_hits_cylinders(
            a, d, pk.cyl_xy[near], pk.cyl_r[near], pk.cyl_zlo[near], pk.cyl_zhi[near]
        ).any():
            return False

    if pk.box_lo.shape[0]:
        near = _aabb_overlap(pk.box_lo, pk.box_hi, seg_lo, seg_hi)
        if near.any() and _segment_hits_boxes(a, d, pk.box_lo[near], pk.box_hi[near]).any():
            return False
    return True


def segment_clearance(env: Environment, a, b) -> float:
    """Minimum signed distance from the segment [a, b] to the obstacles.

    Spheres use the closed-form point-segment distance; cylinders and boxes minimize their
    convex signed-distance function along the segment by golden-section search.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pk = env.packed
    if pk.count == 0:
        return float(clearances(env, np.vstack([a, b])).min())
    d = b - a
    best = np.inf
    if pk.sph_r.size:
        dist = np.array([point_segment_distances(c[None], a, b)[0] for c in pk.sph_c])
        best = min(best, float((dist - pk.sph_r).min()))
    if pk.cyl_r.size:
        values = minimize_on_unit_interval(
            lambda t: _cylinder_sd(
                a + t[:, None] * d, pk.cyl_xy, pk.cyl_r, pk.cyl_zlo, pk.cyl_zhi
            ),
            pk.cyl_r.size,
        )
        best = min(best, float(values.min()))
    if pk.box_lo.shape[0]:
        values = minimize_on_unit_interval(
            lambda t: _box_sd(a + t[:, None] * d, pk.box_lo, pk.box_hi), pk.box_lo.shape[0]
        )
        best = min(best, float(values.min()))
    return best


def boxes_hit_obstacles(env: Environment, lower, upper) -> NDArray[np.bool_]:
    """For each axis-aligned box (rows of ``lower``/``upper``), whether it touches an obstacle
    or leaves the usable workspace."""
    lo = np.atleast_2d(np.asarray(lower, dtype=float))
    hi = np.atleast_2d(np.asarray(upper, dtype=float))
    hit = ~(np.all(lo >= env.free_lower, axis=1) & np.all(hi <= env.free_upper, axis=1))
    pk = env.packed
    if pk.sph_r.size:
        nearest = np.clip(pk.sph_c[None], lo[:, None], hi[:, None])
        dist = np.linalg.norm(nearest - pk.sph_c[None], axis=2)
        hit |= np.any(dist <= pk.sph_r[None], axis=1)
    if pk.cyl_r.size:
        planar = pk.cyl_xy.shape[1]
        nearest = np.clip(pk.cyl_xy[None], lo[:, None, :planar], hi[:, None, :planar])
        dist = np.linalg.norm(nearest - pk.cyl_xy[None], axis=2)
        touching = dist <= pk.cyl_r[None]
        if planar < env.dim:
            touching &= (pk.cyl_zlo[None] <= hi[:, None, -1]) & (
                pk.cyl_zhi[None] >= lo[:, None, -1]
            )
        hit |= np.any(touching, axis=1)
    if pk.box_lo.shape[0]:
        overlap = np.all(
            (pk.box_lo[None] <= hi[:, None]) & (pk.box_hi[None] >= lo[:, None]), axis=2
        )
        hit |= np.any(overlap, axis=1)
    return hit


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def inflate(env: Environment, margin: float) -> Environment:
    """Grow every obstacle by ``margin`` and shrink the usable workspace by the same amount."""
    if margin < 0:
        raise InvalidArgumentError(f"Inflation margin must be non-negative, got {margin}")
    if margin == 0:
        return env
    grown = tuple(o.grown(margin) for o in env.obstacles)
    if np.any(env.free_lower + margin > env.free_upper - margin):
        logger.warning(f"Inflation by {margin:.4f} m leaves no usable workspace")
    return Environment(env.workspace, grown, env.inflation + margin)


def with_obstacles(
    env: Environment, add: Iterable[Obstacle] = (), remove: Sequence[int] = ()
) -> Environment:
    """Copy of ``env`` with obstacles removed by index and new ones appended.

    Added obstacles are given in raw geometry and grown by the environment's inflation.
    """
    dropped = set(int(i) for i in remove)
    kept = [o for i, o in enumerate(env.obstacles) if i not in dropped]
    kept.extend(o.grown(env.inflation) if env.inflation else o for o in add)
    return Environment(env.workspace, tuple(kept), env.inflation)


def poisson_forest(
    density: float,
    workspace: Workspace,
    height_range: Tuple[float, float] = (5.0, 10.0),
    radius_range: Tuple[float, float] = (0.05, 0.15),
    seed: Optional[int] = 0,
) -> Environment:
    """Forest of vertical cylinders standing on the workspace floor.

    The tree count is Poisson with mean ``density × floor area``; trunk centres are uniform
    over the floor (inset by the radius so trunks stay inside the bounds), heights and radii
    uniform in their ranges.
    """
    if workspace.dim != 3:
        raise InvalidArgumentError("Poisson forests require a 3-D workspace")
    if not density > 0:
        raise InvalidArgumentError(f"Tree density must be positive, got {density}")
    if workspace.floor_area <= 0:
        raise InvalidArgumentError("Workspace floor is empty")

    rng = np.random.default_rng(seed)
    count = int(rng.poisson(density * workspace.floor_area))
    lower = np.asarray(workspace.lower)
    upper = np.asarray(workspace.upper)
    radii = rng.uniform(radius_range[0], radius_range[1], size=count)
    heights = rng.uniform(height_range[0], height_range[1], size=count)
    heights = np.minimum(heights, upper[2] - lower[2])
    unit_xy = rng.uniform(0.0, 1.0, size=(count, 2))
    lo_xy = lower[:2] + radii[:, None]
    hi_xy = upper[:2] - radii[:, None]
    xy = lo_xy + unit_xy * (hi_xy - lo_xy)

    trees = tuple(
        Cylinder((x, y, lower[2]), r, h) for (x, y), r, h in zip(xy, radii, heights)
    )
    logger.debug(f"Generated Poisson forest with {count} trees (density {density})")
    return Environment(workspace, trees, 0.0)
