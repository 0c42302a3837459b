"""HTTP service exposing the experiment runner and oracle registry."""

from .app import create_app

__all__ = ["create_app"]
