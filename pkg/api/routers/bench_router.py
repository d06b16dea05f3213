"""Benchmark endpoints for launching sweeps and reading finished runs."""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, BackgroundTasks, HTTPException, Request
from pydantic import BaseModel, Field, ValidationError

from bench.runner import run_ell_sweep, run_forest_sweep

router = APIRouter()
logger = logging.getLogger(__name__)

_bench_tasks: Dict[str, Dict[str, Any]] = {}


class SweepRequest(BaseModel):
    """Request model for a background sweep; unset fields fall back to settings."""

    values: Optional[List[float]] = Field(default=None, description="Densities or ℓ values")
    trials: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    run_name: Optional[str] = None
    workers: Optional[int] = Field(default=1, ge=1)
    config_overrides: Dict[str, Any] = {}


class BenchRunInfo(BaseModel):
    """Information about a benchmark run."""

    run_id: str
    run_name: str = ""
    sweep: str = ""
    timestamp: str = ""
    status: str  # "running", "completed", "error"
    trials: int = 0
    success_rate: Optional[float] = None
    acceptance_passed: Optional[bool] = None


def _runs_dir(request: Request) -> Path:
    return Path(request.app.state.config_manager.get_default_config().runs_dir)


def _start_sweep(
    request: Request, background_tasks: BackgroundTasks, sweep: str, sweep_request: SweepRequest
) -> Dict[str, str]:
    config_manager = request.app.state.config_manager
    try:
        if sweep_request.config_overrides:
            settings = config_manager.get_config_with_overrides(sweep_request.config_overrides)
        else:
            settings = config_manager.get_default_config()
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=f"Invalid configuration: {e}")

    timestamp = datetime.utcnow().strftime("%Y%m%d_%H%M%S")
    run_name = sweep_request.run_name or sweep
    task_id = f"{timestamp}_{run_name}"
    _bench_tasks[task_id] = {
        "status": "running",
        "sweep": sweep,
        "run_name": run_name,
        "timestamp": timestamp,
        "message": "Sweep started",
    }

    def run_sweep_task():
        try:
            if sweep == "density":
                run_dir = run_forest_sweep(
                    settings,
                    densities=sweep_request.values,
                    trials=sweep_request.trials,
                    seed=sweep_request.seed,
                    run_name=run_name,
                    workers=sweep_request.workers,
                )
            else:
                run_dir = run_ell_sweep(
                    settings,
                    ells=sweep_request.values,
                    trials=sweep_request.trials,
                    seed=sweep_request.seed,
                    run_name=run_name,
                    workers=sweep_request.workers,
                )
            _bench_tasks[task_id].update(
                status="completed", message="Sweep completed", run_dir=str(run_dir)
            )
            logger.info(f"Sweep {task_id} completed: {run_dir}")
        except Exception as e:
            _bench_tasks[task_id].update(status="error", message=f"Error: {e}")
            logger.error(f"Sweep {task_id} failed: {e}", exc_info=True)

    background_tasks.add_task(run_sweep_task)
    return {"task_id": task_id, "status": "started", "message": f"{sweep} sweep started"}


@router.post("/forest")
async def start_forest_sweep(
    request: Request, background_tasks: BackgroundTasks, sweep_request: SweepRequest
):
    """Start a forest density sweep in the background."""
    return _start_sweep(request, background_tasks, "density", sweep_request)


@router.post("/ell")
async def start_ell_sweep(
    request: Request, background_tasks: BackgroundTasks, sweep_request: SweepRequest
):
    """Start a corridor width sweep in the background."""
    return _start_sweep(request, background_tasks, "ell", sweep_request)


@router.get("/tasks/{task_id}")
async def get_task(task_id: str):
    """Progress of a sweep started through this API."""
    if task_id not in _bench_tasks:
        raise HTTPException(status_code=404, detail=f"Task {task_id} not found")
    return {"task_id": task_id, **_bench_tasks[task_id]}


def _load_json(path: Path) -> Optional[Dict[str, Any]]:
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@router.get("/runs", response_model=List[BenchRunInfo])
async def list_runs(request: Request):
    """List finished run folders, newest first, followed by sweeps still running."""
    runs_dir = _runs_dir(request)
    runs: List[BenchRunInfo] = []

    if runs_dir.exists():
        for run_dir in sorted(runs_dir.iterdir(), reverse=True):
            if not run_dir.is_dir():
                continue
            try:
                metadata = _load_json(run_dir / "metadata.json") or {}
                summary = _load_json(run_dir / "summary.json")
                acceptance = _load_json(run_dir / "acceptance.json")
                trials = summary["total_trials"] if summary else 0
                runs.append(
                    BenchRunInfo(
                        run_id=run_dir.name,
                        run_name=metadata.get("run_name") or run_dir.name,
                        sweep=metadata.get("sweep", ""),
                        timestamp=metadata.get("timestamp_utc", ""),
                        status="completed" if summary else "error",
                        trials=trials,
                        success_rate=summary["successful"] / trials if trials else None,
                        acceptance_passed=acceptance["passed"] if acceptance else None,
                    )
                )
            except Exception as e:
                logger.warning(f"Failed to load run {run_dir.name}: {e}")

    for task_id, task in _bench_tasks.items():
        if task["status"] == "running":
            runs.append(
                BenchRunInfo(
                    run_id=task_id,
                    run_name=task["run_name"],
                    sweep=task["sweep"],
                    timestamp=task["timestamp"],
                    status="running",
                )
            )
    return runs


@router.get("/runs/{run_id}")
async def get_run(request: Request, run_id: str):
    """Metadata, summary and acceptance results of one run folder."""
    runs_dir = _runs_dir(request)
    run_dir = runs_dir / run_id
    if run_dir.resolve().parent != runs_dir.resolve() or not run_dir.is_dir():
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")

    return {
        "run_id": run_id,
        "metadata": _load_json(run_dir / "metadata.json"),
        "summary": _load_json(run_dir / "summary.json"),
        "acceptance": _load_json(run_dir / "acceptance.json"),
    }
