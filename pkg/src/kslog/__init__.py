"""Finite-volume simulation and weak-form verification for a Keller-Segel
system with logarithmic sensitivity and saturated signal production."""
from .grid import Grid
from .params import DomainError, ModelParams, admissibility
from .solver import SolverConfig, State, run

__all__ = ["DomainError", "Grid", "ModelParams", "SolverConfig", "State", "admissibility", "run"]
__version__ = "0.1.0"
