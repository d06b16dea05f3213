"""Router modules for FastAPI endpoints."""

from api.routers import bench_router, config, plan, system

__all__ = [
    "bench_router",
    "config",
    "plan",
    "system",
]
