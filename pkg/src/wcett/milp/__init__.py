"""Self-contained LP / binary MILP engine."""

from .branch import solve_lp, solve_milp
from .model import (
    BINARY,
    CONTINUOUS,
    INF,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    Constraint,
    MilpError,
    MilpModel,
    MilpSolution,
    NumericFailure,
    SolverTimeout,
    Variable,
    to_lp_format,
)

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "INF",
    "INFEASIBLE",
    "OPTIMAL",
    "UNBOUNDED",
    "Constraint",
    "MilpError",
    "MilpModel",
    "MilpSolution",
    "NumericFailure",
    "SolverTimeout",
    "Variable",
    "solve_lp",
    "solve_milp",
    "to_lp_format",
]
