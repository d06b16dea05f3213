"""HTTP API for the trajectory planner."""

__all__ = ["main", "config_manager", "routers"]
