"""HTTP service exposing a trained checkpoint to interactive clients."""

from .app import create_app

__all__ = ["create_app"]
