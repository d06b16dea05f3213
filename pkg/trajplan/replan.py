"""Receding-horizon execution: commit, monitor triggers, refine and splice new plans.

The loop runs on a virtual clock that advances by the commit horizon t_s. Planning latency
is measured and recorded but never delays the virtual clock, so runs are deterministic for
a fixed seed.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from trajplan.config import Settings, get_settings
from trajplan.corridor import CorridorPlan, State
from trajplan.env import Environment, inflate, points_free, with_obstacles
from trajplan.errors import PlannerFailureError
from trajplan.pipeline import LeadIn, PlanResult, plan_trajectory
from trajplan.sampler import Path, refine
from trajplan.scenario import Scenario, ScenarioEvent
from trajplan.trajectory import Trajectory, VerificationReport, export_csv, sample

logger = logging.getLogger(__name__)

GRID_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class CommittedPiece:
    """A trajectory handed to execution over [t_start, t_end] of absolute time."""

    index: int
    leg: int
    reason: str
    t_start: float
    t_end: float
    trajectory: Trajectory
    path: Optional[Path] = None
    plan: Optional[CorridorPlan] = None
    report: Optional[VerificationReport] = None
    qp_status: Optional[str] = None

    def state_at(self, t: float) -> State:
        return sample(self.trajectory, min(max(t - self.t_start, 0.0), self.trajectory.t_f))

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "leg": self.leg,
            "reason": self.reason,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "h": self.trajectory.h,
            "K": self.trajectory.K,
            "qp_status": self.qp_status,
            "verified": None if self.report is None else self.report.passed,
            "max_separation": None if self.report is None else self.report.max_separation,
            "start": self.state_at(self.t_start).to_dict(),
            "end": self.state_at(self.t_end).to_dict(),
            "path": None if self.path is None else self.path.nodes.tolist(),
        }


class ReplanRecord(BaseModel):
    time: float
    reason: str
    latency_ms: float
    overrun: bool
    success: bool
    splice_time: float
    message: Optional[str] = None


class RefineRecord(BaseModel):
    time: float
    cost_before: float
    cost_after: float
    iterations: int


class SpliceGap(NamedTuple):
    time: float
    position: float
    velocity: float
    acceleration: float


class ReplanDecision(NamedTuple):
    replan: bool
    reason: Optional[str] = None


@dataclass(eq=False)
class RunLog:
    scenario: str
    pieces: List[CommittedPiece] = field(default_factory=list)
    decisions: List[ReplanRecord] = field(default_factory=list)
    refinements: List[RefineRecord] = field(default_factory=list)
    outcome: str = "running"
    goals_reached: int = 0
    final_time: float = 0.0
    message: Optional[str] = None

    def final_state(self) -> Optional[State]:
        if not self.pieces:
            return None
        last = self.pieces[-1]
        return last.state_at(last.t_end)

    def to_dict(self) -> dict:
        final = self.final_state()
        return {
            "scenario": self.scenario,
            "outcome": self.outcome,
            "goals_reached": self.goals_reached,
            "final_time": self.final_time,
            "message": self.message,
            "final_state": None if final is None else final.to_dict(),
            "pieces": [p.to_dict() for p in self.pieces],
            "decisions": [d.model_dump() for d in self.decisions],
            "refinements": [r.model_dump() for r in self.refinements],
            "splice_gaps": [g._asdict() for g in splice_gaps(self)],
        }


def splice_gaps(log: RunLog) -> List[SpliceGap]:
    """Position, velocity and acceleration jumps at every boundary between committed pieces."""
    gaps = []
    for prev, nxt in zip(log.pieces[:-1], log.pieces[1:]):
        before = prev.state_at(prev.t_end)
        after = nxt.state_at(nxt.t_start)
        gaps.append(
            SpliceGap(
                time=nxt.t_start,
                position=float(np.linalg.norm(after.p - before.p)),
                velocity=float(np.linalg.norm(after.v - before.v)),
                acceleration=float(np.linalg.norm(after.a - before.a)),
            )
        )
    return gaps


def trajectory_blocked(
    env_raw: Environment,
    traj: Trajectory,
    t_from: float = 0.0,
    robot_radius: float = 0.0,
    dt: Optional[float] = None,
) -> bool:
    """Whether the part of ``traj`` after ``t_from`` (trajectory time) leaves free space."""
    dt = traj.h / 50 if dt is None else dt
    start = min(max(t_from, 0.0), traj.t_f)
    times = np.append(np.arange(start, traj.t_f, dt), traj.t_f)
    points, _, _ = traj.evaluate(times)
    env = inflate(env_raw, robot_radius) if robot_radius > 0 else env_raw
    return bool(not np.all(points_free(env, points)))


def should_replan(
    clock: float,
    pending: Sequence[ScenarioEvent],
    env_raw: Environment,
    piece: Optional[CommittedPiece] = None,
    robot_radius: float = 0.0,
) -> ReplanDecision:
    """Decide whether the events due at ``clock`` require a new plan.

    ``env_raw`` must already include the due obstacle updates. A goal change always
    triggers; an obstacle update triggers only if it blocks the rest of ``piece``.
    """
    due = [e for e in pending if e.time <= clock]
    if any(e.kind == "goal-change" for e in due):
        return ReplanDecision(True, "goal-change")
    if piece is not None and any(e.kind == "obstacle-update" for e in due):
        t_from = clock - piece.t_start
        if trajectory_blocked(env_raw, piece.trajectory, t_from, robot_radius):
            return ReplanDecision(True, "blocked")
    return ReplanDecision(False, None)


def braking_trajectory(state: State, a_max: float, h: float) -> Trajectory:
    """Constant per-step deceleration from ``state`` to rest with ‖a‖∞ ≤ A_max."""
    speed = float(np.max(np.abs(state.v), initial=0.0))
    steps = max(1, math.ceil(speed / (a_max * h) - GRID_EPS))
    a = -state.v / (steps * h)
    accels = np.repeat(a[None, :], steps, axis=0)
    return Trajectory(State(state.p, state.v, a), accels, h, np.zeros_like(a))


class _Runner:
    """Mutable state of one scenario run."""

    def __init__(self, scenario: Scenario, settings: Settings, seed):
        self.scenario = scenario
        self.settings = settings
        self.ell = scenario.ell or settings.ell
        self.a_max = scenario.a_max or settings.a_max
        self.radius = (
            settings.robot_radius if scenario.robot_radius is None else scenario.robot_radius
        )
        self.t_s = settings.commit_horizon
        master = scenario.seed if seed is None else seed
        self.seeds = np.random.SeedSequence(master)
        self.env_raw = scenario.environment()
        self.goals = scenario.goals()
        self.pending: List[ScenarioEvent] = list(scenario.events)
        self.log = RunLog(scenario.name)
        self.clock = 0.0
        self.leg = 0
        # latest refined path of the current piece and the cost it started from
        self.guide: Optional[Path] = None
        self.baseline: Optional[float] = None

    def plan(
        self, x_start: State, goal: State, reason: str, t_start: float, lead_in=None, guide=None
    ) -> Tuple[Optional[PlanResult], Optional[str]]:
        t0 = time.perf_counter()
        result: Optional[PlanResult] = None
        message = None
        try:
            result = plan_trajectory(
                self.env_raw,
                x_start,
                goal,
                self.settings,
                seed=self.seeds.spawn(1)[0],
                ell=self.ell,
                a_max=self.a_max,
                robot_radius=self.radius,
                lead_in=lead_in,
                guide=guide,
            )
            if not result.success:
                message = (
                    f"QP {result.solution.status.value}, verified={result.report.passed}"
                )
        except PlannerFailureError as e:
            message = f"{e.stage}: {e}"
        latency = (time.perf_counter() - t0) * 1000
        success = result is not None and result.success
        self.log.decisions.append(
            ReplanRecord(
                time=self.clock,
                reason=reason,
                latency_ms=latency,
                overrun=latency > self.t_s * 1000,
                success=success,
                splice_time=t_start,
                message=message,
            )
        )
        if success:
            logger.info(f"[{reason}] planned at t={self.clock:.2f}s in {latency:.1f} ms")
        else:
            logger.warning(f"[{reason}] planning failed at t={self.clock:.2f}s: {message}")
        return (result if success else None), message

    def commit(self, result: PlanResult, t_start: float, reason: str) -> CommittedPiece:
        piece = CommittedPiece(
            index=len(self.log.pieces),
            leg=self.leg,
            reason=reason,
            t_start=t_start,
            t_end=t_start + result.trajectory.t_f,
            trajectory=result.trajectory,
            path=result.path,
            plan=result.plan,
            report=result.report,
            qp_status=result.solution.status.value,
        )
        self.log.pieces.append(piece)
        self.guide = None
        self.baseline = None
        return piece

    def truncate(self, t_end: float) -> None:
        self.log.pieces[-1] = replace(self.log.pieces[-1], t_end=t_end)

    def apply_due_events(self) -> List[ScenarioEvent]:
        due = [e for e in self.pending if e.time <= self.clock]
        self.pending = [e for e in self.pending if e.time > self.clock]
        for event in due:
            if event.kind == "obstacle-update":
                self.env_raw = with_obstacles(
                    self.env_raw, [o.build() for o in event.add], event.remove
                )
                logger.info(
                    f"Obstacle update at t={event.time:.2f}s: +{len(event.add)} "
                    f"-{len(event.remove)}"
                )
        return due

    def fail(self, message: Optional[str], t_final: float) -> None:
        self.log.outcome = "failed"
        self.log.message = message
        self.log.final_time = t_final

    def splice(self, reason: str) -> bool:
        """Replan from the next grid time after ``clock + t_s``; False when the run failed.

        A ``"refined"`` replan that cannot be planned keeps the current piece.
        """
        piece = self.log.pieces[-1]
        traj = piece.trajectory
        h = traj.h
        k_s = math.ceil((self.clock + self.t_s - piece.t_start) / h - GRID_EPS)
        goal = self.goals[self.leg]
        optional = reason == "refined"

        if k_s >= traj.K or piece.plan is None:
            if optional:
                return True
            t_start = piece.t_end
            x_start = State.at_rest(piece.state_at(piece.t_end).p)
            result, message = self.plan(x_start, goal, reason, t_start, guide=self.guide)
            if result is None:
                self.fail(message, piece.t_end)
                return False
            self.commit(result, t_start, reason)
            return True

        t_start = piece.t_start + k_s * h
        x_start = State(traj.positions[k_s], traj.velocities[k_s], traj.accels[k_s])
        lead = LeadIn(piece.plan.waypoints[k_s], piece.plan.waypoints[k_s + 1], traj.accels[k_s])
        result, message = self.plan(x_start, goal, reason, t_start, lead_in=lead, guide=self.guide)
        if result is not None:
            self.truncate(t_start)
            self.commit(result, t_start, reason)
            return True

        if optional:
            logger.info("Keeping the current piece after a failed re-solve on the refined path")
            self.baseline = None
            return True
        if reason == "blocked":
            self.truncate(t_start)
            stop = braking_trajectory(x_start, self.a_max, h)
            self.log.pieces.append(
                CommittedPiece(
                    index=len(self.log.pieces),
                    leg=self.leg,
                    reason="emergency-stop",
                    t_start=t_start,
                    t_end=t_start + stop.t_f,
                    trajectory=stop,
                )
            )
            if trajectory_blocked(self.env_raw, stop, 0.0, self.radius):
                logger.error("Emergency stop trajectory is not collision free")
            self.fail(message, t_start + stop.t_f)
        else:
            self.fail(message, piece.t_end)
        return False

    def refine_remaining(self) -> bool:
        """Refine the current piece's path; True when it shortened enough to re-solve."""
        budget = self.settings.refine_budget
        path = self.log.pieces[-1].path
        if budget <= 0 or path is None or path.tree is None:
            return False
        tree = path.tree
        try:
            before = tree.extract()
        except PlannerFailureError:
            return False
        after = refine(tree, before, budget)
        self.log.refinements.append(
            RefineRecord(
                time=self.clock, cost_before=before.cost, cost_after=after.cost, iterations=budget
            )
        )
        logger.debug(f"Refined remaining path {before.cost:.4f} -> {after.cost:.4f} m")
        self.guide = after
        if self.baseline is None:
            self.baseline = before.cost
        gain = self.settings.refine_resolve_gain
        return gain is not None and after.cost <= (1.0 - gain) * self.baseline

    def idle(self) -> bool:
        """Wait at rest for the next event; True when a new leg was started."""
        while self.pending:
            self.clock = max(self.clock, self.pending[0].time)
            due = self.apply_due_events()
            goal_events = [e for e in due if e.kind == "goal-change"]
            if not goal_events:
                continue
            goal = goal_events[-1].goal.build()
            self.goals.append(goal)
            self.leg = len(self.goals) - 1
            x_start = State.at_rest(self.log.final_state().p)
            result, message = self.plan(x_start, goal, "goal-change", self.clock)
            if result is None:
                self.fail(message, self.clock)
                return False
            self.commit(result, self.clock, "goal-change")
            return True
        return False

    def execute(self) -> RunLog:
        start = self.scenario.start.build()
        result, message = self.plan(start, self.goals[0], "initial", 0.0)
        if result is None:
            self.fail(message, 0.0)
            return self.log
        self.commit(result, 0.0, "initial")

        while True:
            piece = self.log.pieces[-1]
            due = self.apply_due_events()
            goal_events = [e for e in due if e.kind == "goal-change"]
            if goal_events:
                self.goals[self.leg] = goal_events[-1].goal.build()
            decision = should_replan(self.clock, due, self.env_raw, piece, self.radius)
            if decision.replan:
                if not self.splice(decision.reason):
                    return self.log
            elif self.refine_remaining():
                logger.info(f"Refined path is {self.guide.cost:.3f} m, re-solving the remainder")
                self.splice("refined")

            piece = self.log.pieces[-1]
            if self.clock + self.t_s < piece.t_end - GRID_EPS:
                self.clock += self.t_s
                continue

            self.clock = piece.t_end
            self.log.goals_reached += 1
            self.log.final_time = piece.t_end
            logger.info(f"Goal {self.leg} reached at t={piece.t_end:.2f}s")
            if self.leg + 1 < len(self.goals):
                self.leg += 1
                x_start = State.at_rest(piece.state_at(piece.t_end).p)
                result, message = self.plan(x_start, self.goals[self.leg], "task", self.clock)
                if result is None:
                    self.fail(message, self.clock)
                    return self.log
                self.commit(result, self.clock, "task")
                continue
            if self.pending and self.idle():
                continue
            if self.log.outcome == "running":
                self.log.outcome = "reached"
                self.log.final_time = max(self.log.final_time, self.log.pieces[-1].t_end)
            return self.log


def run(scenario: Scenario, settings: Optional[Settings] = None, seed=None) -> RunLog:
    """Execute ``scenario`` on a virtual clock and return the committed pieces and decisions."""
    settings = settings or get_settings()
    runner = _Runner(scenario, settings, seed)
    log = runner.execute()
    logger.info(
        f"Scenario '{scenario.name}' {log.outcome}: {log.goals_reached} goal(s), "
        f"{len(log.pieces)} piece(s), {len(log.decisions)} planning call(s)"
    )
    return log


def write_run_log(log: RunLog, directory: Union[str, FilePath], dt: float = 0.01) -> FilePath:
    """Write ``run_log.json`` and one ``leg_<i>.csv`` per committed piece."""
    out = FilePath(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run_log.json", "w", encoding="utf-8") as f:
        json.dump(log.to_dict(), f, indent=2)
    for piece in log.pieces:
        export_csv(
            piece.trajectory,
            out / f"leg_{piece.index}.csv",
            dt,
            t0=piece.t_start,
            duration=piece.t_end - piece.t_start,
        )
    return out
