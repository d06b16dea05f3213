"""Scenario schema and loading (JSON or YAML)."""

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, Field, model_validator

from trajplan.corridor import State
from trajplan.env import Box, Cylinder, Environment, Obstacle, Sphere, Workspace


class WorkspaceSpec(BaseModel):
    lower: List[float] = Field(..., min_length=2, max_length=3)
    upper: List[float] = Field(..., min_length=2, max_length=3)

    def build(self) -> Workspace:
        return Workspace(tuple(self.lower), tuple(self.upper))


class SphereSpec(BaseModel):
    type: Literal["sphere"] = "sphere"
    center: List[float]
    radius: float = Field(..., gt=0.0)

    def build(self) -> Obstacle:
        return Sphere(tuple(self.center), self.radius)


class CylinderSpec(BaseModel):
    """Vertical cylinder; ``base`` is the centre of its bottom disc."""

    type: Literal["cylinder"] = "cylinder"
    base: List[float]
    radius: float = Field(..., gt=0.0)
    height: float = Field(default=1.0, gt=0.0)

    def build(self) -> Obstacle:
        return Cylinder(tuple(self.base), self.radius, self.height)


class BoxSpec(BaseModel):
    type: Literal["box"] = "box"
    lower: List[float]
    upper: List[float]

    def build(self) -> Obstacle:
        return Box(tuple(self.lower), tuple(self.upper))


ObstacleSpec = Annotated[Union[SphereSpec, CylinderSpec, BoxSpec], Field(discriminator="type")]


class StateSpec(BaseModel):
    p: List[float]
    v: Optional[List[float]] = None
    a: Optional[List[float]] = None

    def build(self) -> State:
        zeros = [0.0] * len(self.p)
        return State(self.p, self.v or zeros, self.a or zeros)


class ScenarioEvent(BaseModel):
    """Scripted change at ``time`` seconds of virtual time.

    ``remove`` holds indices into the obstacle list in force when the event fires.
    """

    time: float = Field(..., ge=0.0)
    kind: Literal["goal-change", "obstacle-update"]
    goal: Optional[StateSpec] = None
    add: List[ObstacleSpec] = Field(default_factory=list)
    remove: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_payload(self) -> "ScenarioEvent":
        if self.kind == "goal-change" and self.goal is None:
            raise ValueError("goal-change events need a goal")
        if self.kind == "obstacle-update" and not (self.add or self.remove):
            raise ValueError("obstacle-update events need obstacles to add or remove")
        return self


class Scenario(BaseModel):
    """A workspace, its obstacles, a start state and one or more goals."""

    name: str
    description: Optional[str] = None
    workspace: WorkspaceSpec
    obstacles: List[ObstacleSpec] = Field(default_factory=list)
    start: StateSpec
    goal: StateSpec
    tasks: List[StateSpec] = Field(default_factory=list)
    ell: Optional[float] = Field(default=None, gt=0.0)
    a_max: Optional[float] = Field(default=None, gt=0.0)
    robot_radius: Optional[float] = Field(default=None, ge=0.0)
    seed: Optional[int] = None
    events: List[ScenarioEvent] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        dim = len(self.workspace.lower)
        if len(self.workspace.upper) != dim:
            raise ValueError("Workspace bounds differ in dimension")
        for state in [self.start, self.goal, *self.tasks]:
            if len(state.p) != dim:
                raise ValueError(f"State {state.p} does not match workspace dimension {dim}")
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValueError("Event times must be non-decreasing")
        return self

    @property
    def dim(self) -> int:
        return len(self.workspace.lower)

    def environment(self) -> Environment:
        return Environment(self.workspace.build(), tuple(o.build() for o in self.obstacles))

    def goals(self) -> List[State]:
        return [self.goal.build()] + [t.build() for t in self.tasks]


def load_scenario(scenario_path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario from a ``.json``, ``.yaml`` or ``.yml`` file."""
    path = Path(scenario_path)

    if not path.exists():
        raise FileNotFoundError(f"Scenario not found: {scenario_path}")

    with open(path, "r", encoding="utf-8") as f:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(f)
        else:
            data = json.load(f)

    return Scenario(**data)
