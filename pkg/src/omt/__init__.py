"""Ordered median tree location: exact enumeration, MILP formulations,
covering-variable tools, preprocessing, heuristics and Benders cuts."""

from .core import (
    CRITERIA,
    FeasibilityError,
    GapMetrics,
    Instance,
    Solution,
    build_lambda,
    evaluate_objective,
    gap_metrics,
    generate_instance,
    kruskal_mst,
    separate_connection_cut,
)
from .oracle import OracleResult, nearest_allocation, solve_exact

__all__ = [
    "CRITERIA",
    "FeasibilityError",
    "GapMetrics",
    "Instance",
    "OracleResult",
    "Solution",
    "build_lambda",
    "evaluate_objective",
    "gap_metrics",
    "generate_instance",
    "kruskal_mst",
    "nearest_allocation",
    "separate_connection_cut",
    "solve_exact",
]

__version__ = "0.1.0"
