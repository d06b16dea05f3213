import json
from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from trajplan.env import Box, Cylinder, Sphere
from trajplan.scenario import Scenario, load_scenario

SCENARIOS_DIR = Path(__file__).resolve().parents[1] / "scenarios"

SCENARIO = {
    "name": "small-room",
    "workspace": {"lower": [0, 0, 0], "upper": [4, 4, 2]},
    "obstacles": [
        {"type": "sphere", "center": [1, 1, 1], "radius": 0.2},
        {"type": "cylinder", "base": [2, 2, 0], "radius": 0.1, "height": 2},
        {"type": "box", "lower": [3, 0, 0], "upper": [3.5, 1, 1]},
    ],
    "start": {"p": [0.5, 0.5, 1.0]},
    "goal": {"p": [3.5, 3.5, 1.0]},
    "tasks": [{"p": [0.5, 3.5, 1.0]}],
    "events": [
        {"time": 1.0, "kind": "goal-change", "goal": {"p": [3.0, 3.0, 1.0]}},
        {"time": 2.0, "kind": "obstacle-update", "remove": [0]},
    ],
}


def test_scenario_builds_environment_and_goals():
    scenario = Scenario(**SCENARIO)
    env = scenario.environment()
    assert scenario.dim == 3
    assert [type(o) for o in env.obstacles] == [Sphere, Cylinder, Box]
    goals = scenario.goals()
    assert len(goals) == 2
    assert goals[0].at_rest_state


def test_load_json_and_yaml(tmp_path):
    json_file = tmp_path / "room.json"
    json_file.write_text(json.dumps(SCENARIO), encoding="utf-8")
    yaml_file = tmp_path / "room.yaml"
    yaml_file.write_text(yaml.safe_dump(SCENARIO), encoding="utf-8")
    assert load_scenario(json_file).name == load_scenario(yaml_file).name == "small-room"


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_scenario("does/not/exist.json")


@pytest.mark.parametrize(
    "change",
    [
        {"start": {"p": [0.5, 0.5]}},
        {"events": [{"time": 1.0, "kind": "goal-change"}]},
        {"events": [{"time": 1.0, "kind": "obstacle-update"}]},
        {
            "events": [
                {"time": 2.0, "kind": "goal-change", "goal": {"p": [1, 1, 1]}},
                {"time": 1.0, "kind": "goal-change", "goal": {"p": [2, 2, 1]}},
            ]
        },
        {"obstacles": [{"type": "sphere", "center": [1, 1, 1], "radius": -1}]},
        {"obstacles": [{"type": "cone", "center": [1, 1, 1]}]},
    ],
)
def test_invalid_scenarios(change):
    with pytest.raises(ValidationError):
        Scenario(**{**SCENARIO, **change})


@pytest.mark.parametrize("name", ["maze.json", "forest_replan.yaml"])
def test_bundled_scenarios_load(name):
    scenario = load_scenario(SCENARIOS_DIR / name)
    env = scenario.environment()
    assert env.dim == scenario.dim == 3
    assert scenario.seed is not None
