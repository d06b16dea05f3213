"""Trial record schema shared by the runner, reporting and acceptance checks."""

import json
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel


class TrialRecord(BaseModel):
    """One benchmark trial; metric fields are None when no path was found."""

    sweep: str
    group_index: int
    trial_index: int
    seed: int
    density: Optional[float] = None
    ell: float
    success: bool = False
    path_found: bool = False
    qp_status: Optional[str] = None
    verified: bool = False
    path_length: Optional[float] = None
    trajectory_length: Optional[float] = None
    max_velocity: Optional[float] = None
    max_acceleration: Optional[float] = None
    max_separation: Optional[float] = None
    separation_bound: Optional[float] = None
    qp_variables: Optional[int] = None
    clearance: Optional[float] = None
    kkt_residual: Optional[float] = None
    sampling_time_ms: Optional[float] = None
    corridor_time_ms: Optional[float] = None
    qp_time_ms: Optional[float] = None
    verify_time_ms: Optional[float] = None
    planning_time_s: Optional[float] = None
    error: Optional[str] = None

    @property
    def group_value(self) -> float:
        return self.density if self.sweep == "density" else self.ell


def load_records(report_file: Path) -> List[TrialRecord]:
    """Read a ``report.jsonl`` file, ordered by group and trial."""
    records = []
    with open(report_file, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(TrialRecord(**json.loads(line)))
    records.sort(key=lambda r: (r.sweep, r.group_index, r.trial_index))
    return records
