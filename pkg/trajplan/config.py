"""Configuration management for the trajectory planner and benchmark harness."""

from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load .env from project root
_project_root = Path(__file__).parent.parent
_env_file = _project_root / ".env"
load_dotenv(_env_file, override=True)


class Settings(BaseSettings):
    """Planner settings loaded from environment variables and the project .env file."""

    model_config = SettingsConfigDict(
        env_file=str(_env_file),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="allow",
    )

    # Corridor
    ell: float = Field(default=0.05, gt=0.0, description="Corridor half-width ℓ (m)")
    a_max: float = Field(default=20.0, gt=0.0, description="Acceleration cap A_max (m/s²)")
    robot_radius: float = Field(
        default=0.0, ge=0.0, description="Radius of the robot's bounding ball (m)"
    )

    # Sampling planner
    goal_radius: float = Field(default=0.005, gt=0.0, description="Goal region radius (m)")
    rrt_rounds: int = Field(default=4, ge=1, description="Maximum informed RRT* rounds")
    rrt_iters_per_round: int = Field(default=2000, ge=1, description="Iterations per round")
    steer_step: float = Field(default=0.5, gt=0.0, description="Maximum edge length (m)")
    goal_bias: float = Field(
        default=0.05, ge=0.0, le=1.0, description="Goal sampling probability before first solution"
    )
    rrt_gamma: Optional[float] = Field(
        default=None, gt=0.0, description="Rewiring constant γ (derived from free volume if unset)"
    )

    # QP solver
    qp_tol: float = Field(default=1e-8, gt=0.0, description="KKT residual tolerance")
    qp_max_iter: int = Field(default=100_000, ge=1, description="Solver iteration cap per axis")
    qp_warm_start: bool = Field(default=True, description="Warm start the QP from the witness")

    # Verification
    verify_dt_divisor: int = Field(
        default=50, ge=20, description="Verification sampling step is h / verify_dt_divisor"
    )

    # Replanning
    commit_horizon: float = Field(default=0.5, gt=0.0, description="Commit horizon t_s (s)")
    refine_budget: int = Field(
        default=200, ge=0, description="Rewiring iterations between commits"
    )
    refine_resolve_gain: Optional[float] = Field(
        default=None,
        ge=0.0,
        lt=1.0,
        description="Path shortening ratio that re-solves the remaining trajectory (None: never)",
    )

    # Forest benchmark
    forest_size: float = Field(default=10.0, gt=0.0, description="Forest cube edge length (m)")
    tree_height_min: float = Field(default=5.0, gt=0.0, description="Minimum tree height (m)")
    tree_height_max: float = Field(default=10.0, gt=0.0, description="Maximum tree height (m)")
    tree_radius_min: float = Field(default=0.05, gt=0.0, description="Minimum tree radius (m)")
    tree_radius_max: float = Field(default=0.15, gt=0.0, description="Maximum tree radius (m)")
    min_start_goal_distance: float = Field(
        default=8.0, ge=0.0, description="Minimum straight-line start/goal separation (m)"
    )
    trials_per_density: int = Field(default=50, ge=1, description="Trials per forest density")
    density_grid: List[float] = Field(
        default=[0.7, 1.2, 1.7, 2.2, 2.7, 3.2], description="Forest densities (trees/m²)"
    )

    # Corridor width benchmark
    ell_grid: List[float] = Field(
        default=[0.010, 0.015, 0.020, 0.025, 0.030, 0.035], description="ℓ values to sweep (m)"
    )
    ell_trials: int = Field(default=20, ge=1, description="Trials per ℓ value")
    ell_robot_radius: float = Field(
        default=0.035, ge=0.0, description="Robot radius used in the string scene (m)"
    )

    # Harness
    workers: int = Field(default=4, ge=1, description="Worker processes for trial pools")
    runs_dir: str = Field(default="./storage/runs", description="Benchmark run output folder")
    log_level: str = Field(default="INFO", description="Logging level for the CLI")


def get_settings() -> Settings:
    """Get application settings.

    Creates a new Settings instance which loads from .env and uses Field defaults.
    """
    return Settings()
