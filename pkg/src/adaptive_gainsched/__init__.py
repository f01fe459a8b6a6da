"""Adaptive gain-scheduled state feedback for polytopic LPV systems."""

from .model import PolytopicSystem, example_system
from .sdp import FEASIBLE, INCONCLUSIVE, INFEASIBLE, SolverOptions
from .synthesis import (
    ControllerRealization,
    SynthesisOptions,
    hurwitz_check,
    synthesize,
    verify_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "ControllerRealization", "FEASIBLE", "INCONCLUSIVE", "INFEASIBLE", "PolytopicSystem",
    "SolverOptions", "SynthesisOptions", "example_system", "hurwitz_check", "synthesize",
    "verify_certificate",
]
