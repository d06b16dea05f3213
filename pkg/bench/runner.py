"""Benchmark runner - forest density and corridor width sweeps over the planning pipeline."""

import json
import logging
import time
import uuid
from concurrent.futures import ProcessPoolExecutor, as_completed
from datetime import datetime
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn

from bench.acceptance import evaluate_acceptance, write_acceptance
from bench.metrics import compute_metrics
from bench.records import TrialRecord
from bench.reporting import emit, generate_summary
from bench.scenes import forest_workspace, sample_start_goal, string_pairs, string_scene
from trajplan.config import Settings
from trajplan.corridor import State
from trajplan.env import Environment, inflate, poisson_forest
from trajplan.errors import InvalidArgumentError, PlannerFailureError
from trajplan.pipeline import corridor_margin, plan_trajectory

logger = logging.getLogger(__name__)
console = Console()

DENSITY_RANGE = (0.1, 4.0)


def trial_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def create_run_folder(run_name: str = None, runs_dir: str = "storage/runs") -> Path:
    """Create run folder with timestamp."""
    timestamp = datetime.utcnow().strftime("%Y%m%d_%H%M%S")
    folder_name = f"{timestamp}_{run_name}" if run_name else timestamp
    run_folder = Path(runs_dir) / folder_name
    run_folder.mkdir(parents=True, exist_ok=True)
    return run_folder


def save_config_snapshot(run_folder: Path, settings: Settings) -> None:
    """Save complete configuration snapshot."""
    config_snapshot = settings.model_dump()
    config_snapshot["timestamp_utc"] = datetime.utcnow().isoformat()

    with open(run_folder / "config_snapshot.json", "w") as f:
        json.dump(config_snapshot, f, indent=2)


def _plan_record(
    base: dict, env: Environment, start, goal, settings: Settings, planner_seed, **overrides
) -> TrialRecord:
    t0 = time.perf_counter()
    try:
        result = plan_trajectory(
            env, State.at_rest(start), State.at_rest(goal), settings, seed=planner_seed, **overrides
        )
    except PlannerFailureError as e:
        return TrialRecord(
            **base,
            error=f"{e.stage}: {e}",
            planning_time_s=time.perf_counter() - t0,
        )
    metrics = compute_metrics(result)
    timings = result.timings
    return TrialRecord(
        **base,
        success=result.success,
        path_found=True,
        qp_status=result.solution.status.value,
        verified=result.report.passed,
        path_length=metrics["path_length"],
        trajectory_length=metrics["trajectory_length"],
        max_velocity=metrics["max_velocity"],
        max_acceleration=metrics["max_acceleration"],
        max_separation=metrics["max_separation"],
        separation_bound=metrics["separation_bound"],
        qp_variables=int(metrics["qp_variables"]),
        clearance=metrics["clearance"],
        kkt_residual=metrics["kkt_residual"],
        sampling_time_ms=timings.get("sampling_time_ms"),
        corridor_time_ms=timings.get("corridor_time_ms"),
        qp_time_ms=timings.get("qp_time_ms"),
        verify_time_ms=timings.get("verify_time_ms"),
        planning_time_s=timings.get("total_time_ms", 0.0) / 1000,
        error=None if result.success else "; ".join(result.report.failures) or None,
    )


def run_forest_trial(
    density: float, group_index: int, trial_index: int, seed: int, settings_data: dict
) -> TrialRecord:
    """Plan one rest-to-rest query through a freshly generated Poisson forest."""
    settings = Settings(**settings_data)
    base = dict(
        sweep="density",
        group_index=group_index,
        trial_index=trial_index,
        seed=seed,
        density=density,
        ell=settings.ell,
    )
    try:
        workspace = forest_workspace(settings.forest_size)
        env = poisson_forest(
            density,
            workspace,
            height_range=(settings.tree_height_min, settings.tree_height_max),
            radius_range=(settings.tree_radius_min, settings.tree_radius_max),
            seed=seed,
        )
        margin = corridor_margin(settings.ell, env.dim, settings.robot_radius)
        rng = np.random.default_rng([seed, 1])
        start, goal = sample_start_goal(
            inflate(env, margin), rng, settings.min_start_goal_distance
        )
        return _plan_record(base, env, start, goal, settings, [seed, 2])
    except Exception as e:
        logger.error(f"Forest trial {group_index}/{trial_index} failed: {e}", exc_info=True)
        return TrialRecord(**base, error=str(e))


def run_ell_trial(
    ell: float,
    group_index: int,
    trial_index: int,
    seed: int,
    scene_seed: int,
    start: Sequence[float],
    goal: Sequence[float],
    settings_data: dict,
) -> TrialRecord:
    """Plan one query of the shared string scene with corridor half-width ``ell``."""
    settings = Settings(**settings_data)
    base = dict(
        sweep="ell", group_index=group_index, trial_index=trial_index, seed=seed, ell=ell
    )
    try:
        env = string_scene(scene_seed)
        return _plan_record(
            base,
            env,
            np.asarray(start),
            np.asarray(goal),
            settings,
            [seed, 2],
            ell=ell,
            robot_radius=settings.ell_robot_radius,
        )
    except Exception as e:
        logger.error(f"ℓ trial {group_index}/{trial_index} failed: {e}", exc_info=True)
        return TrialRecord(**base, error=str(e))


def _execute(
    jobs: List[Tuple[Callable[..., TrialRecord], tuple]],
    workers: int,
    jsonl_file: Optional[Path] = None,
    description: str = "Running trials",
) -> List[TrialRecord]:
    """Run jobs serially or in a process pool; records come back ordered by group and trial."""
    records: List[TrialRecord] = []

    def collect(record: TrialRecord) -> None:
        records.append(record)
        if jsonl_file is not None:
            with open(jsonl_file, "a", encoding="utf-8") as f:
                f.write(record.model_dump_json() + "\n")

    with Progress(
        SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console
    ) as progress:
        task = progress.add_task(f"{description}...", total=len(jobs))
        if workers <= 1:
            for i, (fn, args) in enumerate(jobs, 1):
                progress.update(task, description=f"[cyan]{description} {i}/{len(jobs)}[/cyan]")
                collect(fn(*args))
                progress.advance(task)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(fn, *args): args for fn, args in jobs}
                for i, future in enumerate(as_completed(futures), 1):
                    progress.update(task, description=f"[cyan]{description} {i}/{len(jobs)}[/cyan]")
                    try:
                        collect(future.result())
                    except Exception as e:
                        logger.error(f"Worker failed on {futures[future][:3]}: {e}", exc_info=True)
                    progress.advance(task)

    records.sort(key=lambda r: (r.group_index, r.trial_index))
    return records


def density_sweep(
    densities: Sequence[float],
    trials: int,
    settings: Settings,
    seed: int = 0,
    workers: int = 1,
    jsonl_file: Optional[Path] = None,
) -> List[TrialRecord]:
    """``trials`` forest queries per density.

    Trial seeds derive from (seed, density index, trial).
    """
    for density in densities:
        if not DENSITY_RANGE[0] <= density <= DENSITY_RANGE[1]:
            raise InvalidArgumentError(f"Density {density} outside {DENSITY_RANGE}")
    data = settings.model_dump()
    jobs = [
        (run_forest_trial, (float(density), g, t, trial_seed(seed, g, t), data))
        for g, density in enumerate(densities)
        for t in range(trials)
    ]
    return _execute(jobs, workers, jsonl_file, "Forest trials")


def ell_sweep(
    ells: Sequence[float],
    trials: int,
    settings: Settings,
    seed: int = 0,
    scene_seed: int = 0,
    workers: int = 1,
    jsonl_file: Optional[Path] = None,
) -> List[TrialRecord]:
    """``trials`` string-scene queries per ℓ, with start/goal pairs and seeds shared across ℓ."""
    if not ells or min(ells) <= 0:
        raise InvalidArgumentError("ℓ values must be positive")
    env = string_scene(scene_seed)
    widest = corridor_margin(max(ells), env.dim, settings.ell_robot_radius)
    pairs = string_pairs(inflate(env, widest), trials, seed=trial_seed(seed, 0))
    data = settings.model_dump()
    jobs = [
        (
            run_ell_trial,
            (
                float(ell),
                g,
                t,
                trial_seed(seed, t),
                scene_seed,
                start.tolist(),
                goal.tolist(),
                data,
            ),
        )
        for g, ell in enumerate(ells)
        for t, (start, goal) in enumerate(pairs)
    ]
    return _execute(jobs, workers, jsonl_file, "ℓ trials")


def _start_run(settings: Settings, run_name: Optional[str], extra: dict) -> Tuple[Path, dict]:
    run_folder = create_run_folder(run_name, settings.runs_dir)
    console.print(f"Run folder: [green]{run_folder}[/green]\n")
    save_config_snapshot(run_folder, settings)
    metadata = {
        "run_id": str(uuid.uuid4()),
        "run_name": run_name,
        "timestamp_utc": datetime.utcnow().isoformat(),
        **extra,
    }
    with open(run_folder / "metadata.json", "w") as f:
        json.dump(metadata, f, indent=2)
    return run_folder, metadata


def _finish_run(run_folder: Path, records: List[TrialRecord], settings: Settings) -> Path:
    console.print("\n[cyan]Generating summary report...[/cyan]\n")
    summary, _ = generate_summary(run_folder, settings)
    emit(records, run_folder, "csv")
    emit(records, run_folder, "plot-data")
    checks = evaluate_acceptance(records)
    write_acceptance(run_folder, checks)

    console.print("[bold cyan]BENCHMARK SUMMARY[/bold cyan]\n")
    for group in summary["groups"]:
        console.print(
            f"  {group['sweep']}={group['value']:g}: success {group['success_rate']:.0%} "
            f"({group['trials']} trials, path found {group['path_found_rate']:.0%}), "
            f"mean time {group['mean_planning_time_s'] or 0.0:.3f} s"
        )
    console.print()
    for check in checks:
        mark = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
        if check.skipped:
            mark = "[yellow]SKIP[/yellow]"
        console.print(f"  {mark} {check.name}: {check.detail}")
    console.print(f"\n[bold]Full report:[/bold] [green]{run_folder}[/green]\n")
    return run_folder


def run_forest_sweep(
    settings: Settings,
    densities: Optional[Sequence[float]] = None,
    trials: Optional[int] = None,
    seed: int = 0,
    run_name: Optional[str] = None,
    workers: Optional[int] = None,
) -> Path:
    """Run a density sweep into a new run folder and return its path."""
    densities = list(densities or settings.density_grid)
    trials = trials or settings.trials_per_density
    workers = workers or settings.workers
    console.print("\n[bold cyan]Starting Forest Density Sweep[/bold cyan]")
    console.print(f"Densities: {densities}, {trials} trials each, ℓ={settings.ell}\n")
    run_folder, _ = _start_run(
        settings,
        run_name or "forest",
        {"sweep": "density", "densities": densities, "trials": trials, "seed": seed},
    )
    records = density_sweep(
        densities, trials, settings, seed, workers, jsonl_file=run_folder / "report.jsonl"
    )
    return _finish_run(run_folder, records, settings)


def run_ell_sweep(
    settings: Settings,
    ells: Optional[Sequence[float]] = None,
    trials: Optional[int] = None,
    seed: int = 0,
    scene_seed: int = 0,
    run_name: Optional[str] = None,
    workers: Optional[int] = None,
) -> Path:
    """Run a corridor-width sweep on the string scene into a new run folder."""
    ells = list(ells or settings.ell_grid)
    trials = trials or settings.ell_trials
    workers = workers or settings.workers
    console.print("\n[bold cyan]Starting Corridor Width Sweep[/bold cyan]")
    console.print(f"ℓ grid: {ells}, {trials} trials each\n")
    run_folder, _ = _start_run(
        settings,
        run_name or "ell",
        {"sweep": "ell", "ells": ells, "trials": trials, "seed": seed, "scene_seed": scene_seed},
    )
    records = ell_sweep(
        ells, trials, settings, seed, scene_seed, workers, jsonl_file=run_folder / "report.jsonl"
    )
    return _finish_run(run_folder, records, settings)
