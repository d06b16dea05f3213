"""Corridor QP: assembly of the jerk-minimizing problem and its solver."""

from trajplan.qp.active_set import ActiveSetParams, solve_bounded
from trajplan.qp.admm import AdmmParams, QpSolution, SolveStatus, solve
from trajplan.qp.problem import (
    KktResidual,
    QpInstance,
    assemble,
    difference_matrix,
    dump_instance,
    dynamics_rows,
    jerk_hessian,
    kkt_residual,
    position_map,
    velocity_map,
)

__all__ = [
    "ActiveSetParams",
    "AdmmParams",
    "KktResidual",
    "QpInstance",
    "QpSolution",
    "SolveStatus",
    "assemble",
    "difference_matrix",
    "dump_instance",
    "dynamics_rows",
    "jerk_hessian",
    "kkt_residual",
    "position_map",
    "velocity_map",
    "solve",
    "solve_bounded",
]
