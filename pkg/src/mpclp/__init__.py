"""Exact branch-and-cut for the multiple probabilistic covering location problem."""

from .bnc import PRESETS, SolverConfig, SolveResult, SolveStatus, solve
from .instance import Instance, preprocess, read_instance
from .objective import Solution, greedy_incumbent, joint_coverage, objective_value

__all__ = [
    "Instance",
    "PRESETS",
    "Solution",
    "SolveResult",
    "SolveStatus",
    "SolverConfig",
    "greedy_incumbent",
    "joint_coverage",
    "objective_value",
    "preprocess",
    "read_instance",
    "solve",
]
__version__ = "0.1.0"
