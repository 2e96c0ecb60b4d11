"""Routing and in-motion charging coordination for dual-fleet EV operations."""

from .config import SolverConfig
from .model import (
    FeasibilityReport,
    InfeasibleInstanceError,
    Instance,
    Route,
    RouteStructureError,
    Solution,
    build_schedule,
    check_feasibility,
    evaluate_cost,
    finalize_solution,
    route_energy_profile,
)

__version__ = "0.1.0"

__all__ = [
    "FeasibilityReport",
    "InfeasibleInstanceError",
    "Instance",
    "Route",
    "RouteStructureError",
    "Solution",
    "SolverConfig",
    "build_schedule",
    "check_feasibility",
    "evaluate_cost",
    "finalize_solution",
    "route_energy_profile",
    "__version__",
]
