"""Acceptance checks over benchmark trial records."""

import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from scipy.stats import spearmanr

from bench.records import TrialRecord
from bench.reporting import aggregate, group_records

logger = logging.getLogger(__name__)

SEPARATION_SLACK = 1e-9
TIMING_RANK_THRESHOLD = 0.8
MIN_TREND_GROUPS = 3


class AcceptanceCheck(BaseModel):
    name: str
    passed: bool
    detail: str
    value: Optional[float] = None
    skipped: bool = False


def _skipped(name: str, detail: str) -> AcceptanceCheck:
    return AcceptanceCheck(name=name, passed=True, detail=detail, skipped=True)


def check_feasibility(records: List[TrialRecord]) -> AcceptanceCheck:
    """Every trial that found a path must end with an optimal, verified trajectory."""
    found = [r for r in records if r.path_found]
    if not found:
        return AcceptanceCheck(name="feasibility", passed=False, detail="no trial found a path")
    bad = [r for r in found if not r.success]
    return AcceptanceCheck(
        name="feasibility",
        passed=not bad,
        detail=f"{len(found) - len(bad)}/{len(found)} trials with a path are optimal and verified",
        value=(len(found) - len(bad)) / len(found),
    )


def check_separation(records: List[TrialRecord]) -> AcceptanceCheck:
    """Measured separation never exceeds the analytic bound."""
    measured = [
        (r.max_separation, r.separation_bound)
        for r in records
        if r.max_separation is not None and r.separation_bound is not None
    ]
    if not measured:
        return _skipped("separation-bound", "no trial reported a separation")
    excess = max(sep - bound for sep, bound in measured)
    return AcceptanceCheck(
        name="separation-bound",
        passed=excess <= SEPARATION_SLACK,
        detail=f"largest excess over the bound {excess:.3e} m over {len(measured)} trials",
        value=excess,
    )


def _rank_trend(
    name: str, values: List[float], means: List[Optional[float]], threshold: float
) -> AcceptanceCheck:
    pairs = [(v, m) for v, m in zip(values, means) if m is not None]
    if len(pairs) < MIN_TREND_GROUPS:
        return _skipped(name, f"needs {MIN_TREND_GROUPS} groups with data, got {len(pairs)}")
    rho, _ = spearmanr([p[0] for p in pairs], [p[1] for p in pairs])
    rho = float(rho)
    return AcceptanceCheck(
        name=name,
        passed=bool(np.isfinite(rho) and rho > threshold),
        detail=f"Spearman ρ = {rho:.3f} (threshold {threshold})",
        value=rho,
    )


def check_density_timing(
    records: List[TrialRecord], threshold: float = TIMING_RANK_THRESHOLD
) -> AcceptanceCheck:
    """Mean planning time rises with forest density."""
    stats = [aggregate(*g) for g in group_records(records) if g[0] == "density"]
    return _rank_trend(
        "density-timing",
        [s["value"] for s in stats],
        [s["mean_planning_time_s"] for s in stats],
        threshold,
    )


def check_ell_trends(records: List[TrialRecord]) -> List[AcceptanceCheck]:
    """Wider corridors give longer paths and faster flight; the narrowest one the largest QP."""
    stats = [aggregate(*g) for g in group_records(records) if g[0] == "ell"]
    values = [s["value"] for s in stats]
    checks = [
        _rank_trend("ell-path-length", values, [s["mean_path_length"] for s in stats], 0.0),
        _rank_trend("ell-max-velocity", values, [s["mean_max_velocity"] for s in stats], 0.0),
    ]
    sized = [(s["value"], s["mean_qp_variables"]) for s in stats if s["mean_qp_variables"]]
    if len(sized) < 2:
        checks.append(_skipped("ell-qp-size", "needs two ℓ groups with QP sizes"))
    else:
        narrowest = min(sized)[1]
        largest = max(size for _, size in sized)
        checks.append(
            AcceptanceCheck(
                name="ell-qp-size",
                passed=narrowest >= largest,
                detail=f"narrowest ℓ mean K·d {narrowest:.0f}, largest {largest:.0f}",
                value=narrowest,
            )
        )
    return checks


def evaluate_acceptance(records: List[TrialRecord]) -> List[AcceptanceCheck]:
    """Run the checks that apply to the sweeps present in ``records``."""
    checks = [check_feasibility(records), check_separation(records)]
    sweeps = {r.sweep for r in records}
    if "density" in sweeps:
        checks.append(check_density_timing(records))
    if "ell" in sweeps:
        checks.extend(check_ell_trends(records))
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.warning(f"Acceptance checks failed: {failed}")
    return checks


def all_passed(checks: List[AcceptanceCheck]) -> bool:
    return all(c.passed for c in checks)


def write_acceptance(run_folder: Path, checks: List[AcceptanceCheck]) -> Path:
    out_file = Path(run_folder) / "acceptance.json"
    with open(out_file, "w", encoding="utf-8") as f:
        json.dump(
            {"passed": all_passed(checks), "checks": [c.model_dump() for c in checks]},
            f,
            indent=2,
        )
    return out_file


def load_acceptance(run_folder: Path) -> List[AcceptanceCheck]:
    """Read back ``acceptance.json`` from a finished run."""
    acceptance_file = Path(run_folder) / "acceptance.json"
    if not acceptance_file.exists():
        raise FileNotFoundError(f"No acceptance results in {run_folder}")
    with open(acceptance_file, "r", encoding="utf-8") as f:
        data = json.load(f)
    return [AcceptanceCheck(**c) for c in data["checks"]]
