"""Classic and transient multi-agent path finding solvers with a lifelong execution engine."""

from .core import Instance, Mode, Solution, SolveResult, detect_conflicts, makespan, path_cost, soc, validate
from .grid import GridGraph, parse_map, parse_scen

__version__ = "0.1.0"

__all__ = [
    "GridGraph", "Instance", "Mode", "Solution", "SolveResult", "detect_conflicts", "makespan", "parse_map",
    "parse_scen", "path_cost", "soc", "validate",
]
