"""HTTP service layer (FastAPI) over the mimicmark core."""

from .app import create_app

__all__ = ["create_app"]
