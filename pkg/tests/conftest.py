"""Shared fixtures for the planner test suite."""

import numpy as np
import pytest

from trajplan.config import Settings
from trajplan.env import Box, Cylinder, Environment, Sphere, Workspace


@pytest.fixture
def settings(tmp_path) -> Settings:
    """Small planning budgets so end-to-end tests stay quick."""
    return Settings(
        ell=0.05,
        a_max=20.0,
        robot_radius=0.0,
        rrt_rounds=2,
        rrt_iters_per_round=400,
        qp_tol=1e-8,
        commit_horizon=0.5,
        refine_budget=20,
        workers=1,
        runs_dir=str(tmp_path / "runs"),
        trials_per_density=2,
        ell_trials=2,
    )


@pytest.fixture
def open_env() -> Environment:
    return Environment(Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 2.0)))


@pytest.fixture
def pillar_env() -> Environment:
    """A single full-height pillar in the middle of a 4 × 4 × 2 m room."""
    return Environment(
        Workspace((0.0, 0.0, 0.0), (4.0, 4.0, 2.0)),
        (Cylinder((2.0, 2.0, 0.0), 0.2, 2.0),),
    )


@pytest.fixture
def mixed_env() -> Environment:
    return Environment(
        Workspace((0.0, 0.0, 0.0), (10.0, 10.0, 10.0)),
        (
            Sphere((2.0, 2.0, 2.0), 0.5),
            Cylinder((5.0, 5.0, 0.0), 0.3, 4.0),
            Box((7.0, 1.0, 0.0), (8.0, 2.0, 3.0)),
        ),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
