"""Session-oriented control service for live, steerable simulations."""

from otcsim.service.app import create_app

__all__ = ["create_app"]
