"""Exception hierarchy for planning failures and invalid inputs."""


class TrajectoryPlanningError(Exception):
    """Base class for planning errors."""


class InvalidArgumentError(TrajectoryPlanningError, ValueError):
    """A precondition of a planning operation was violated."""


class PlannerFailureError(TrajectoryPlanningError):
    """No trajectory could be produced.

    ``stage`` is ``"sampling"`` when no obstacle-free path was found (or the start/goal is
    blocked) and ``"qp"`` when the corridor QP did not reach an optimal solution.
    """

    def __init__(self, message: str, stage: str = "sampling"):
        super().__init__(message)
        self.stage = stage
