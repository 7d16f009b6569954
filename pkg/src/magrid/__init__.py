"""Deterministic multi-agent grid games with text manuals, oracle planners,
an entity-division decision core, and a line-delimited control protocol."""

from .core import ACTIONS, GridPos, Rng, StepResult, Transcript
from .episode import Episode, Observation

__all__ = [
    "ACTIONS",
    "Episode",
    "GridPos",
    "Observation",
    "Rng",
    "StepResult",
    "Transcript",
]

__version__ = "0.1.0"
