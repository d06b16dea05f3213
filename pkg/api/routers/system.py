"""System status endpoint."""

from pathlib import Path

from fastapi import APIRouter, Request
from pydantic import BaseModel

from trajplan import __version__

router = APIRouter()

SCENARIOS_DIR = Path("scenarios")


class SystemStatus(BaseModel):
    """System status information."""

    version: str
    runs_dir: str
    bench_runs: int
    scenarios: int


@router.get("/status", response_model=SystemStatus)
async def get_system_status(request: Request):
    """Counts of benchmark run folders and bundled scenario files."""
    settings = request.app.state.config_manager.get_default_config()
    runs_dir = Path(settings.runs_dir)

    run_dirs = len([d for d in runs_dir.iterdir() if d.is_dir()]) if runs_dir.exists() else 0
    scenario_files = (
        len([f for f in SCENARIOS_DIR.iterdir() if f.suffix in (".json", ".yaml", ".yml")])
        if SCENARIOS_DIR.exists()
        else 0
    )

    return SystemStatus(
        version=__version__,
        runs_dir=str(runs_dir),
        bench_runs=run_dirs,
        scenarios=scenario_files,
    )
