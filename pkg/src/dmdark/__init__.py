"""Vector fiber ring-laser simulator for dispersion-managed dark pulses."""

__version__ = "0.1.0"

from dmdark.analysis import StateClassification, classify, find_dark_pulses
from dmdark.cavity import CavityConfig, InitialCondition, net_dispersion, round_trip, run_to_steady_state
from dmdark.fiber import FiberSegment, StepControl, propagate_segment
from dmdark.grid import TimeGrid, VectorField, make_grid
from dmdark.kernels import BACKEND

__all__ = [
    "BACKEND",
    "CavityConfig",
    "FiberSegment",
    "InitialCondition",
    "StateClassification",
    "StepControl",
    "TimeGrid",
    "VectorField",
    "classify",
    "find_dark_pulses",
    "make_grid",
    "net_dispersion",
    "propagate_segment",
    "round_trip",
    "run_to_steady_state",
]
