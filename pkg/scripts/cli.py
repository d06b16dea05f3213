"""Command-line interface for the corridor trajectory planner benchmarks."""

import logging
from pathlib import Path
from typing import List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from bench.acceptance import all_passed, evaluate_acceptance, load_acceptance
from bench.properties import run_self_checks
from bench.records import load_records
from bench.runner import run_ell_sweep, run_forest_sweep
from trajplan.config import Settings, get_settings
from trajplan.replan import run, splice_gaps, write_run_log
from trajplan.scenario import load_scenario

app = typer.Typer(help="CLI for corridor-constrained QP trajectory planning benchmarks")
console = Console()
logger = logging.getLogger(__name__)

SPLICE_TOL = 1e-9


def _parse_floats(text: Optional[str]) -> Optional[List[float]]:
    if not text:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise typer.BadParameter(f"Expected comma-separated numbers, got '{text}'")


def _settings_with(**overrides) -> Settings:
    """Current settings with the non-None CLI overrides applied (and validated)."""
    settings = get_settings()
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return settings
    return Settings(**{**settings.model_dump(), **updates})


def _config_error(e: ValidationError) -> None:
    console.print(
        Panel(
            f"[bold red]Invalid settings[/bold red]\n{e}",
            title="Configuration Error",
            border_style="red",
        )
    )


def _print_acceptance(run_folder: Path) -> bool:
    checks = load_acceptance(run_folder)
    passed = all_passed(checks)
    style = "green" if passed else "red"
    console.print(f"[bold {style}]Acceptance: {'passed' if passed else 'FAILED'}[/bold {style}]")
    return passed


@app.callback()
def main_callback(
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (defaults to LOG_LEVEL from settings)"
    ),
):
    """Configure logging for every command."""
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True)],
        force=True,
    )


@app.command("forest-sweep")
def forest_sweep(
    densities: Optional[str] = typer.Option(
        None, "--densities", help="Comma-separated tree densities (trees/m²)"
    ),
    trials: Optional[int] = typer.Option(None, "--trials", "-n", help="Trials per density"),
    seed: int = typer.Option(0, "--seed", "-s", help="Master seed"),
    ell: Optional[float] = typer.Option(None, "--ell", help="Corridor half-width ℓ (m)"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Worker processes"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o", help="Runs folder"),
    run_name: Optional[str] = typer.Option(None, "--run-name", "-r", help="Custom run name"),
):
    """Plan rest-to-rest queries through Poisson forests of increasing density."""
    console.print("\n[bold cyan]Forest Density Sweep[/bold cyan]\n")

    try:
        settings = _settings_with(ell=ell, runs_dir=output_dir)
        run_folder = run_forest_sweep(
            settings,
            densities=_parse_floats(densities),
            trials=trials,
            seed=seed,
            run_name=run_name,
            workers=workers,
        )
        if not _print_acceptance(run_folder):
            raise typer.Exit(code=1)
        console.print(f"Results: [cyan]{run_folder}[/cyan]\n")

    except typer.Exit:
        raise
    except ValidationError as e:
        _config_error(e)
        raise typer.Exit(code=1)
    except Exception as e:
        console.print(f"\n[bold red]Error: {e}[/bold red]\n")
        logger.error("Forest sweep failed", exc_info=True)
        raise typer.Exit(code=1)


@app.command("ell-sweep")
def ell_sweep(
    ells: Optional[str] = typer.Option(None, "--ells", help="Comma-separated ℓ values (m)"),
    trials: Optional[int] = typer.Option(None, "--trials", "-n", help="Trials per ℓ"),
    seed: int = typer.Option(0, "--seed", "-s", help="Master seed"),
    scene_seed: int = typer.Option(0, "--scene-seed", help="Seed of the string scene"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Worker processes"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o", help="Runs folder"),
    run_name: Optional[str] = typer.Option(None, "--run-name", "-r", help="Custom run name"),
):
    """Sweep the corridor half-width ℓ on the fixed string scene."""
    console.print("\n[bold cyan]Corridor Width Sweep[/bold cyan]\n")

    try:
        settings = _settings_with(runs_dir=output_dir)
        run_folder = run_ell_sweep(
            settings,
            ells=_parse_floats(ells),
            trials=trials,
            seed=seed,
            scene_seed=scene_seed,
            run_name=run_name,
            workers=workers,
        )
        if not _print_acceptance(run_folder):
            raise typer.Exit(code=1)
        console.print(f"Results: [cyan]{run_folder}[/cyan]\n")

    except typer.Exit:
        raise
    except ValidationError as e:
        _config_error(e)
        raise typer.Exit(code=1)
    except Exception as e:
        console.print(f"\n[bold red]Error: {e}[/bold red]\n")
        logger.error("ℓ sweep failed", exc_info=True)
        raise typer.Exit(code=1)


@app.command("run-scenario")
def run_scenario(
    scenario: str = typer.Option(..., "--scenario", "-f", help="Scenario JSON or YAML file"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Override the scenario seed"),
    output_dir: Optional[str] = typer.Option(
        None, "--output-dir", "-o", help="Write run_log.json and leg CSVs here"
    ),
    dt: float = typer.Option(0.01, "--dt", help="Sampling step of the leg CSVs (s)"),
    commit_horizon: Optional[float] = typer.Option(
        None, "--commit-horizon", help="Commit horizon t_s (s)"
    ),
):
    """Execute a scenario with replanning on a virtual clock."""
    console.print("\n[bold cyan]Running Scenario[/bold cyan]\n")

    try:
        settings = _settings_with(commit_horizon=commit_horizon)
        definition = load_scenario(scenario)
        console.print(f"[bold]Scenario:[/bold] {definition.name}")
        if definition.description:
            console.print(f"[dim]{definition.description}[/dim]")
        console.print(f"Goals: {len(definition.goals())}, events: {len(definition.events)}\n")

        with console.status("[cyan]Planning and executing...[/cyan]", spinner="dots"):
            log = run(definition, settings, seed=seed)

        table = Table(title="Committed pieces")
        for column in ["#", "leg", "reason", "t_start", "t_end", "K", "QP", "verified"]:
            table.add_column(column)
        for piece in log.pieces:
            verified = "-" if piece.report is None else str(piece.report.passed)
            table.add_row(
                str(piece.index),
                str(piece.leg),
                piece.reason,
                f"{piece.t_start:.3f}",
                f"{piece.t_end:.3f}",
                str(piece.trajectory.K),
                piece.qp_status or "-",
                verified,
            )
        console.print(table)

        for decision in log.decisions:
            status = "[green]ok[/green]" if decision.success else "[red]failed[/red]"
            overrun = " [yellow](overrun)[/yellow]" if decision.overrun else ""
            console.print(
                f"  t={decision.time:.2f}s {decision.reason}: {status} "
                f"in {decision.latency_ms:.1f} ms{overrun}"
            )

        gaps = splice_gaps(log)
        worst_gap = max([max(g.position, g.velocity) for g in gaps], default=0.0)
        console.print(f"\nLargest splice discontinuity: {worst_gap:.3e}")

        if output_dir:
            out = write_run_log(log, output_dir, dt)
            console.print(f"Run log: [cyan]{out}[/cyan]")

        if log.outcome != "reached":
            console.print(f"\n[bold red]Outcome: {log.outcome}[/bold red] {log.message or ''}\n")
            raise typer.Exit(code=1)
        if worst_gap >= SPLICE_TOL:
            console.print("\n[bold red]Splice points are not continuous[/bold red]\n")
            raise typer.Exit(code=1)
        console.print(
            f"\n[bold green]✓ Reached {log.goals_reached} goal(s) "
            f"at t={log.final_time:.2f}s[/bold green]\n"
        )

    except typer.Exit:
        raise
    except ValidationError as e:
        _config_error(e)
        raise typer.Exit(code=1)
    except Exception as e:
        console.print(f"\n[bold red]Error: {e}[/bold red]\n")
        logger.error("Scenario run failed", exc_info=True)
        raise typer.Exit(code=1)


@app.command()
def verify(
    cases: int = typer.Option(
        100_000, "--cases", "-n", help="Randomized cases per step-construction suite"
    ),
    seed: int = typer.Option(0, "--seed", "-s", help="Seed of the randomized suites"),
    run_dir: Optional[str] = typer.Option(
        None, "--run-dir", help="Also re-check acceptance on an existing run folder"
    ),
):
    """Run the corridor self-checks and optionally re-check a finished benchmark run."""
    console.print("\n[bold cyan]Self-Checks[/bold cyan]\n")

    try:
        with console.status("[cyan]Running property suites...[/cyan]", spinner="dots"):
            results = run_self_checks(cases, seed)

        table = Table()
        for column in ["check", "cases", "failures", "max error", "result"]:
            table.add_column(column)
        for result in results:
            table.add_row(
                result.name,
                str(result.cases),
                str(result.failures),
                f"{result.max_error:.3e}",
                "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]",
            )
        console.print(table)
        passed = all(r.passed for r in results)

        if run_dir:
            report_file = Path(run_dir) / "report.jsonl"
            if not report_file.exists():
                console.print(f"\n[bold red]No report.jsonl in {run_dir}[/bold red]\n")
                raise typer.Exit(code=1)
            checks = evaluate_acceptance(load_records(report_file))
            console.print(f"\n[bold]Acceptance for[/bold] [cyan]{run_dir}[/cyan]")
            for check in checks:
                mark = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
                if check.skipped:
                    mark = "[yellow]SKIP[/yellow]"
                console.print(f"  {mark} {check.name}: {check.detail}")
            passed = passed and all_passed(checks)

        if not passed:
            console.print("\n[bold red]Self-checks failed[/bold red]\n")
            raise typer.Exit(code=1)
        console.print("\n[bold green]✓ All checks passed[/bold green]\n")

    except typer.Exit:
        raise
    except Exception as e:
        console.print(f"\n[bold red]Error: {e}[/bold red]\n")
        logger.error("Verification failed", exc_info=True)
        raise typer.Exit(code=1)


def main():
    app()


if __name__ == "__main__":
    main()
