"""Emotion-aware road routing.

Precomputes a per-edge "happiness layer" over a road graph with a
decision-forest emotion scorer, routes under happiness-penalized travel
time, and ships the analysis tooling to compare happy vs. fastest routes.
"""

__version__ = "0.1.0"


class AffectRouterError(Exception):
    """Base class for all errors raised by this package."""
