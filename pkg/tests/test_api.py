import json

import pytest
from fastapi.testclient import TestClient

from api.main import app

ROOM = {
    "name": "api-room",
    "workspace": {"lower": [0, 0, 0], "upper": [4, 4, 2]},
    "start": {"p": [0.5, 0.5, 1.0]},
    "goal": {"p": [1.5, 0.5, 1.0]},
    "seed": 0,
}


@pytest.fixture
def runs_dir(tmp_path):
    return tmp_path / "runs"


@pytest.fixture
def client(runs_dir):
    overrides = {
        "rrt_rounds": 2,
        "rrt_iters_per_round": 400,
        "refine_budget": 20,
        "workers": 1,
        "runs_dir": str(runs_dir),
    }
    with TestClient(app) as test_client:
        response = test_client.post("/api/config", json={"overrides": overrides})
        assert response.status_code == 200
        yield test_client
        test_client.post("/api/config/reset")


def test_health(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_config_round_trip(client, runs_dir):
    data = client.get("/api/config").json()
    assert data["config"]["runs_dir"] == str(runs_dir)
    assert data["overrides"]["rrt_rounds"] == 2

    check = client.post("/api/config/validate", json={"overrides": {"ell": -1}}).json()
    assert check["valid"] is False
    assert "ell" in check["errors"]
    assert client.post("/api/config", json={"overrides": {"ell": -1}}).status_code == 400

    reset = client.post("/api/config/reset").json()
    assert reset["overrides"] == {}
    assert "ell" in client.get("/api/config/schema").json()["fields"]


def test_system_status(client, runs_dir):
    status = client.get("/api/system/status").json()
    assert status["runs_dir"] == str(runs_dir)
    assert status["bench_runs"] == 0


def test_plan_returns_sampled_trajectory(client):
    response = client.post("/api/plan", json={"scenario": ROOM, "dt": 0.1})
    assert response.status_code == 200, response.text
    data = response.json()
    assert data["summary"]["success"] is True
    assert data["report"]["passed"] is True
    assert data["samples"][0]["p"] == pytest.approx([0.5, 0.5, 1.0])
    assert data["samples"][-1]["p"] == pytest.approx([1.5, 0.5, 1.0], abs=1e-6)
    assert data["path"][0] == pytest.approx([0.5, 0.5, 1.0])


def test_plan_into_obstacle_is_unprocessable(client):
    blocked = {
        **ROOM,
        "obstacles": [{"type": "cylinder", "base": [2, 2, 0], "radius": 0.2, "height": 2}],
        "goal": {"p": [2.0, 2.0, 1.0]},
    }
    response = client.post("/api/plan", json={"scenario": blocked})
    assert response.status_code == 422
    assert "sampling" in response.json()["detail"]


def test_plan_rejects_invalid_overrides(client):
    response = client.post("/api/plan", json={"scenario": ROOM, "config_overrides": {"a_max": 0}})
    assert response.status_code == 400


def test_scenario_run(client):
    response = client.post("/api/plan/scenario", json={"scenario": ROOM})
    assert response.status_code == 200, response.text
    assert response.json()["outcome"] == "reached"


def test_bench_runs_listing(client, runs_dir):
    run_dir = runs_dir / "20260101_000000_forest"
    run_dir.mkdir(parents=True)
    (run_dir / "metadata.json").write_text(
        json.dumps({"run_name": "forest", "sweep": "density"}), encoding="utf-8"
    )
    (run_dir / "summary.json").write_text(
        json.dumps({"total_trials": 4, "successful": 3}), encoding="utf-8"
    )
    (run_dir / "acceptance.json").write_text(
        json.dumps({"passed": True, "checks": []}), encoding="utf-8"
    )

    runs = client.get("/api/bench/runs").json()
    assert len(runs) == 1
    assert runs[0]["status"] == "completed"
    assert runs[0]["success_rate"] == pytest.approx(0.75)
    assert runs[0]["acceptance_passed"] is True

    detail = client.get(f"/api/bench/runs/{run_dir.name}").json()
    assert detail["metadata"]["sweep"] == "density"
    assert client.get("/api/bench/runs/missing").status_code == 404
    assert client.get("/api/bench/tasks/unknown").status_code == 404
