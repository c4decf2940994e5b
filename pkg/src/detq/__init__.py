"""Deterministic unit-speed particles with spin kicks, their exact quantum
twin on a grid, and a mean-field solver for the complex one-particle spectrum."""

__version__ = "0.1.0"

from .model import GridSpec, ModelSpec, Point, snap_to_grid, validate  # noqa: E402
from .classical import (ClassicalState, Event, Trajectory, apply_event, merged_class_count,  # noqa: E402
                        next_event, simulate, simulate_discrete)
from ._backend import NAME as BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "ClassicalState", "Event", "GridSpec", "ModelSpec", "Point", "Trajectory",
    "apply_event", "merged_class_count", "next_event", "simulate", "simulate_discrete",
    "snap_to_grid", "validate",
]
