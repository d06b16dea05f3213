"""Run the FastAPI development server.

Usage:
    trajplan-api
    python -m api.server

Or with uvicorn directly:
    uvicorn api.main:app --reload --port 8000
"""

import uvicorn


def start(host: str = "127.0.0.1", port: int = 8000, reload: bool = False) -> None:
    uvicorn.run("api.main:app", host=host, port=port, reload=reload, log_level="info")


if __name__ == "__main__":
    start(reload=True)
