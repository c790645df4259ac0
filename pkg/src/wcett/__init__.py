"""Worst-case execution time estimation from a small set of measured paths."""

from .dag import PathVec, ProgramDag
from .estimator import EstimateReport, estimate_wcett, iterative_basis, solve_bound, solve_delta, solve_worst
from .platform import MeasurementSet, PlatformModel
from .spanner import PathBasis, compute_spanner

__all__ = [
    "EstimateReport",
    "MeasurementSet",
    "PathBasis",
    "PathVec",
    "PlatformModel",
    "ProgramDag",
    "compute_spanner",
    "estimate_wcett",
    "iterative_basis",
    "solve_bound",
    "solve_delta",
    "solve_worst",
]
