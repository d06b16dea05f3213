"""FastAPI backend for the corridor trajectory planner.

Thin wrapper around the trajplan library and the bench harness:
- configuration overrides are validated and kept in a ConfigManager
- single planning queries and scenario runs execute per request
- benchmark sweeps run as background tasks writing ordinary run folders
"""

from contextlib import asynccontextmanager
from pathlib import Path

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.config_manager import ConfigManager
from api.routers import bench_router, config, plan, system
from trajplan import __version__

# Load .env from project root
project_root = Path(__file__).parent.parent
load_dotenv(project_root / ".env", override=True)

config_manager = ConfigManager()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan context manager for startup/shutdown events."""
    config_manager.load_default_config()
    yield


app = FastAPI(
    title="Corridor Trajectory Planner API",
    description="Plan verified trajectories, run scenarios and launch benchmark sweeps",
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(config.router, prefix="/api/config", tags=["Configuration"])
app.include_router(plan.router, prefix="/api/plan", tags=["Planning"])
app.include_router(bench_router.router, prefix="/api/bench", tags=["Benchmarks"])
app.include_router(system.router, prefix="/api/system", tags=["System"])


@app.get("/")
async def root():
    """Root endpoint pointing at the API docs."""
    return {"message": "Corridor Trajectory Planner API. Visit /docs for API documentation."}


@app.get("/api/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": "trajplan-api", "version": __version__}


app.state.config_manager = config_manager
