"""Graph-cover towers of GM type, their inverse limits, exact
nested-interval embeddings into the line, and certified contraction checks."""

from .dynamics import Thread, backward, forward, predecessor, successor, thread_of
from .embedding import IntervalAtlas, build_atlas
from .exact import ExactScalar, Interval
from .extension import build_extension, verify_extension
from .gmtower import CoverTower, odometer_tower, random_simple_tower, validate_gm
from .graphcore import Graph, GraphHom

__all__ = [
    "CoverTower",
    "ExactScalar",
    "Graph",
    "GraphHom",
    "Interval",
    "IntervalAtlas",
    "Thread",
    "backward",
    "build_atlas",
    "build_extension",
    "forward",
    "odometer_tower",
    "predecessor",
    "random_simple_tower",
    "successor",
    "thread_of",
    "validate_gm",
    "verify_extension",
]
