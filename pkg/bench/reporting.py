"""Reporting utilities for benchmark runs."""

import csv
import heapq
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bench.records import TrialRecord, load_records
from trajplan.config import Settings

logger = logging.getLogger(__name__)

TOP_N_SLOWEST = 5

COLUMNS = [
    "row_type",
    "sweep",
    "group_index",
    "trial_index",
    "seed",
    "density",
    "ell",
    "success",
    "path_found",
    "qp_status",
    "verified",
    "path_length",
    "trajectory_length",
    "max_velocity",
    "max_acceleration",
    "max_separation",
    "separation_bound",
    "qp_variables",
    "clearance",
    "kkt_residual",
    "sampling_time_ms",
    "corridor_time_ms",
    "qp_time_ms",
    "verify_time_ms",
    "planning_time_s",
    "error",
]

RATE_FIELDS = ["success", "path_found", "verified"]

NUMERIC_FIELDS = [
    "path_length",
    "trajectory_length",
    "max_velocity",
    "max_acceleration",
    "max_separation",
    "separation_bound",
    "qp_variables",
    "clearance",
    "kkt_residual",
    "sampling_time_ms",
    "corridor_time_ms",
    "qp_time_ms",
    "verify_time_ms",
    "planning_time_s",
]

PLOT_COLUMNS = [
    "sweep",
    "value",
    "trials",
    "path_found_rate",
    "success_rate",
    "mean_path_length",
    "mean_trajectory_length",
    "mean_max_velocity",
    "mean_max_acceleration",
    "max_separation",
    "separation_bound",
    "mean_qp_variables",
    "mean_planning_time_s",
    "median_planning_time_s",
]


def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(present)) if present else None


def group_records(records: List[TrialRecord]) -> List[Tuple[str, float, List[TrialRecord]]]:
    """Split records into (sweep, value, trials) groups ordered by sweep and group index."""
    groups: Dict[Tuple[str, int], List[TrialRecord]] = {}
    for record in records:
        groups.setdefault((record.sweep, record.group_index), []).append(record)
    return [
        (sweep, members[0].group_value, sorted(members, key=lambda r: r.trial_index))
        for (sweep, _), members in sorted(groups.items())
    ]


def aggregate(sweep: str, value: float, members: List[TrialRecord]) -> Dict[str, Any]:
    """Per-group statistics; metric means are over trials that found a path."""
    found = [r for r in members if r.path_found]
    times = [r.planning_time_s for r in found if r.planning_time_s is not None]
    separations = [r.max_separation for r in found if r.max_separation is not None]
    bounds = [r.separation_bound for r in found if r.separation_bound is not None]
    stats: Dict[str, Any] = {
        "sweep": sweep,
        "value": value,
        "trials": len(members),
        "path_found_rate": len(found) / len(members) if members else 0.0,
        "success_rate": sum(r.success for r in members) / len(members) if members else 0.0,
        "feasibility_rate": sum(r.success for r in found) / len(found) if found else None,
        "max_separation": max(separations) if separations else None,
        "separation_bound": max(bounds) if bounds else None,
        "median_planning_time_s": float(np.median(times)) if times else None,
    }
    for name in NUMERIC_FIELDS:
        stats[f"mean_{name}"] = _mean([getattr(r, name) for r in found])
    return stats


def generate_summary(run_folder: Path, settings: Settings) -> Tuple[Dict[str, Any], str]:
    """Generate summary statistics and markdown report."""
    results = load_records(run_folder / "report.jsonl")

    if not results:
        raise ValueError("No results found")

    groups = [aggregate(*group) for group in group_records(results)]
    found = [r for r in results if r.path_found]
    slowest = heapq.nlargest(
        TOP_N_SLOWEST, found, key=lambda r: r.planning_time_s or 0.0
    )
    failures = [r for r in results if not r.success]

    summary_dict = {
        "total_trials": len(results),
        "path_found": len(found),
        "successful": sum(r.success for r in results),
        "groups": groups,
        "slowest_trials": [
            {
                "sweep": r.sweep,
                "value": r.group_value,
                "trial_index": r.trial_index,
                "seed": r.seed,
                "planning_time_s": r.planning_time_s,
                "qp_variables": r.qp_variables,
            }
            for r in slowest
        ],
        "failures": [
            {
                "sweep": r.sweep,
                "value": r.group_value,
                "trial_index": r.trial_index,
                "seed": r.seed,
                "qp_status": r.qp_status,
                "error": r.error,
            }
            for r in failures
        ],
    }

    markdown_text = _generate_markdown(summary_dict, settings, run_folder)

    with open(run_folder / "summary.md", "w", encoding="utf-8") as f:
        f.write(markdown_text)

    with open(run_folder / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary_dict, f, indent=2)

    return summary_dict, markdown_text


def _fmt(value: Optional[float], pattern: str = ".3f") -> str:
    return "-" if value is None else format(value, pattern)


def _generate_markdown(summary: Dict[str, Any], settings: Settings, run_folder: Path) -> str:
    """Generate markdown formatted report."""
    lines = [
        "# Benchmark Summary\n",
        f"**Run folder:** `{run_folder}`",
        f"**Trials:** {summary['total_trials']} "
        f"(path found {summary['path_found']}, successful {summary['successful']})",
        f"**Settings:** ℓ={settings.ell}, A_max={settings.a_max}, "
        f"robot radius={settings.robot_radius}, qp_tol={settings.qp_tol:g}\n",
        "## Groups\n",
        "| sweep | value | trials | path found | success | path length | max speed "
        "| max sep. | bound | QP vars | mean time (s) |",
        "|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for g in summary["groups"]:
        lines.append(
            f"| {g['sweep']} | {g['value']:g} | {g['trials']} | {g['path_found_rate']:.0%} "
            f"| {g['success_rate']:.0%} | {_fmt(g['mean_path_length'])} "
            f"| {_fmt(g['mean_max_velocity'])} | {_fmt(g['max_separation'], '.4f')} "
            f"| {_fmt(g['separation_bound'], '.4f')} | {_fmt(g['mean_qp_variables'], '.0f')} "
            f"| {_fmt(g['mean_planning_time_s'])} |"
        )

    if summary["slowest_trials"]:
        lines.append("\n## Slowest Trials\n")
        for i, item in enumerate(summary["slowest_trials"], 1):
            lines.append(
                f"{i}. {item['sweep']}={item['value']:g} trial {item['trial_index']} "
                f"(seed {item['seed']}) - {_fmt(item['planning_time_s'])} s, "
                f"{item['qp_variables']} QP variables"
            )

    if summary["failures"]:
        lines.append("\n## Failures\n")
        for item in summary["failures"]:
            lines.append(
                f"- {item['sweep']}={item['value']:g} trial {item['trial_index']} "
                f"(seed {item['seed']}): {item['error'] or item['qp_status']}"
            )

    return "\n".join(lines) + "\n"


def _mean_row(sweep: str, value: float, members: List[TrialRecord]) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "row_type": "mean",
        "sweep": sweep,
        "group_index": members[0].group_index,
        "density": members[0].density,
        "ell": members[0].ell,
    }
    for name in RATE_FIELDS:
        row[name] = sum(getattr(r, name) for r in members) / len(members)
    found = [r for r in members if r.path_found]
    for name in NUMERIC_FIELDS:
        row[name] = _mean([getattr(r, name) for r in found])
    return row


def emit(records: List[TrialRecord], out_dir: Path, fmt: str = "csv") -> Path:
    """Write ``records.csv`` (trial rows plus one mean row per group) or ``plot_data.csv``.

    Mean rows hold rates in the boolean columns. An empty record list writes only the header.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = group_records(records)

    if fmt == "csv":
        out_file = out_dir / "records.csv"
        with open(out_file, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=COLUMNS, restval="")
            writer.writeheader()
            for sweep, value, members in groups:
                for record in members:
                    writer.writerow({"row_type": "trial", **record.model_dump()})
                writer.writerow(_mean_row(sweep, value, members))
    elif fmt == "plot-data":
        out_file = out_dir / "plot_data.csv"
        with open(out_file, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=PLOT_COLUMNS, extrasaction="ignore", restval="")
            writer.writeheader()
            for group in groups:
                writer.writerow(aggregate(*group))
    else:
        raise ValueError(f"Unknown output format '{fmt}' (expected 'csv' or 'plot-data')")

    logger.info(f"Wrote {len(records)} records to {out_file}")
    return out_file
