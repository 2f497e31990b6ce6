"""Seeded simulator for evolving multisets with hash-derived fitness, plus a spatial baseline."""

from .core import (
    ConfigError,
    Multiset,
    Population,
    PopulationOverflow,
    ReplicationEvent,
    SimConfig,
    StepSummary,
    ValidationError,
    canonicalize,
    validate_config,
)
from .fitness import fitness, hash64
from .nonspatial import run
from .rng import RngStream, rng_stream
from .spatial import SpatialConfig, run_spatial

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Multiset",
    "Population",
    "PopulationOverflow",
    "ReplicationEvent",
    "RngStream",
    "SimConfig",
    "SpatialConfig",
    "StepSummary",
    "ValidationError",
    "canonicalize",
    "fitness",
    "hash64",
    "rng_stream",
    "run",
    "run_spatial",
    "validate_config",
]
