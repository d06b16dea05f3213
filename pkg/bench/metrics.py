"""Per-trial metrics registry computed from a planning result."""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from trajplan.pipeline import PlanResult
from trajplan.trajectory import Trajectory

logger = logging.getLogger(__name__)

ARC_SAMPLES_PER_STEP = 20


def trajectory_length(traj: Trajectory, samples_per_step: int = ARC_SAMPLES_PER_STEP) -> float:
    """Arc length of p(t), from a dense polyline approximation."""
    if traj.K == 0:
        return 0.0
    times = np.linspace(0.0, traj.t_f, traj.K * samples_per_step + 1)
    points, _, _ = traj.evaluate(times)
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def path_length(result: PlanResult) -> float:
    return result.path.cost


def max_velocity(result: PlanResult) -> float:
    return result.report.max_speed


def max_acceleration(result: PlanResult) -> float:
    return result.report.max_acceleration


def max_separation(result: PlanResult) -> float:
    return result.report.max_separation


def separation_bound(result: PlanResult) -> float:
    return result.report.separation_bound


def qp_variables(result: PlanResult) -> float:
    return float(result.instance.n_variables)


def clearance(result: PlanResult) -> float:
    return result.path.min_clearance


def kkt_residual(result: PlanResult) -> float:
    return result.solution.residuals.worst()


# Metric registry: one line per metric
METRIC_REGISTRY: Dict[str, Callable[[PlanResult], float]] = {
    "path_length": path_length,
    "trajectory_length": lambda r: trajectory_length(r.trajectory),
    "max_velocity": max_velocity,
    "max_acceleration": max_acceleration,
    "max_separation": max_separation,
    "separation_bound": separation_bound,
    "qp_variables": qp_variables,
    "clearance": clearance,
    "kkt_residual": kkt_residual,
}

DEFAULT_METRICS = list(METRIC_REGISTRY)


def compute_metrics(
    result: PlanResult, selected_metrics: Optional[List[str]] = None
) -> Dict[str, float]:
    """Evaluate the selected metrics; a failing metric is logged and reported as NaN."""
    selected_metrics = selected_metrics or DEFAULT_METRICS
    values: Dict[str, float] = {}
    for name in selected_metrics:
        if name not in METRIC_REGISTRY:
            logger.warning(f"Unknown metric '{name}' - available: {list(METRIC_REGISTRY)}")
            continue
        try:
            values[name] = float(METRIC_REGISTRY[name](result))
        except Exception as e:
            logger.error(f"Error computing {name}: {e}")
            values[name] = float("nan")
    return values
