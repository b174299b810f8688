"""HTTP node service: FastAPI app over a single-writer node runtime."""

from .app import create_app
from .runtime import ApiError, NodeRuntime

__all__ = ["ApiError", "NodeRuntime", "create_app"]
