"""Planning endpoints: single queries and full scenario runs."""

import logging
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, HTTPException, Request
from pydantic import BaseModel, Field, ValidationError

from trajplan.errors import InvalidArgumentError, PlannerFailureError
from trajplan.pipeline import plan_trajectory
from trajplan.replan import run
from trajplan.scenario import Scenario
from trajplan.trajectory import time_series

router = APIRouter()
logger = logging.getLogger(__name__)


class PlanRequest(BaseModel):
    """Plan from ``scenario.start`` to ``scenario.goal``; tasks and events are ignored."""

    scenario: Scenario
    seed: Optional[int] = None
    dt: float = Field(default=0.05, gt=0.0, description="Sampling step of the returned series")
    config_overrides: Dict[str, Any] = {}


class TrajectorySample(BaseModel):
    t: float
    p: List[float]
    v: List[float]
    a: List[float]


class PlanResponse(BaseModel):
    summary: Dict[str, Any]
    report: Dict[str, Any]
    path: List[List[float]]
    waypoints: int
    samples: List[TrajectorySample]


class ScenarioRunRequest(BaseModel):
    scenario: Scenario
    seed: Optional[int] = None
    config_overrides: Dict[str, Any] = {}


def _settings(request: Request, overrides: Dict[str, Any]):
    config_manager = request.app.state.config_manager
    try:
        if overrides:
            return config_manager.get_config_with_overrides(overrides)
        return config_manager.get_default_config()
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=f"Invalid configuration: {e}")


@router.post("", response_model=PlanResponse)
def plan(request: Request, plan_request: PlanRequest):
    """Plan one verified trajectory and return it sampled every ``dt`` seconds."""
    settings = _settings(request, plan_request.config_overrides)
    scenario = plan_request.scenario
    seed = plan_request.seed if plan_request.seed is not None else scenario.seed

    try:
        result = plan_trajectory(
            scenario.environment(),
            scenario.start.build(),
            scenario.goal.build(),
            settings,
            seed=seed,
            ell=scenario.ell,
            a_max=scenario.a_max,
            robot_radius=scenario.robot_radius,
        )
    except PlannerFailureError as e:
        raise HTTPException(status_code=422, detail=f"Planning failed ({e.stage}): {e}")
    except InvalidArgumentError as e:
        raise HTTPException(status_code=400, detail=str(e))

    times, p, v, a = time_series(result.trajectory, plan_request.dt)
    samples = [
        TrajectorySample(t=float(t), p=p[i].tolist(), v=v[i].tolist(), a=a[i].tolist())
        for i, t in enumerate(times)
    ]
    logger.info(f"API plan '{scenario.name}': success={result.success}")
    return PlanResponse(
        summary=result.summary(),
        report=result.report.model_dump(),
        path=result.path.nodes.tolist(),
        waypoints=result.plan.K + 1,
        samples=samples,
    )


@router.post("/scenario")
def run_scenario(request: Request, run_request: ScenarioRunRequest):
    """Execute a scenario with replanning and return its run log."""
    settings = _settings(request, run_request.config_overrides)
    try:
        log = run(run_request.scenario, settings, seed=run_request.seed)
    except InvalidArgumentError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return log.to_dict()
