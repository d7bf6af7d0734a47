"""HTTP service layer: pydantic schemas, job functions, FastAPI app."""

from .app import app, create_app

__all__ = ["app", "create_app"]
