from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

INF = math.inf

CONTINUOUS = "continuous"
BINARY = "binary"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class MilpError(RuntimeError):
    pass


class NumericFailure(MilpError):
    pass


class SolverTimeout(MilpError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = INF


@dataclass(frozen=True)
class Constraint:
    """``lo <= sum(coeffs[v] * v) <= hi``; plain relations set one side infinite."""

    coeffs: Mapping[str, float]
    lo: float
    hi: float
    name: str = ""

    @property
    def relation(self) -> str:
        if self.lo == self.hi:
            return "="
        if self.lo == -INF:
            return "<="
        if self.hi == INF:
            return ">="
        return "range"


@dataclass
class MilpModel:
    """Linear model over continuous and binary variables.

    Build with :meth:`add_var`, :meth:`add_constraint` and :meth:`set_objective`;
    solvers read the dense form from :meth:`arrays` and never mutate the model.
    """

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    sense: str = "max"
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = INF) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        elif kind != CONTINUOUS:
            raise ValueError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ValueError(f"variable {name!r} has empty bounds [{lb}, {ub}]")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        return name

    def add_constraint(
        self, coeffs: Mapping[str, float], relation: str, rhs: float, name: str = ""
    ) -> None:
        if relation in ("<=", "≤"):
            lo, hi = -INF, rhs
        elif relation in (">=", "≥"):
            lo, hi = rhs, INF
        elif relation in ("=", "=="):
            lo, hi = rhs, rhs
        else:
            raise ValueError(f"unknown relation {relation!r}")
        self._add(coeffs, float(lo), float(hi), name)

    def add_range(self, coeffs: Mapping[str, float], lo: float, hi: float, name: str = "") -> None:
        """Shorthand for the pair ``expr >= lo`` and ``expr <= hi`` held as one row."""
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        self._add(coeffs, float(lo), float(hi), name)

    def _add(self, coeffs: Mapping[str, float], lo: float, hi: float, name: str) -> None:
        unknown = [v for v in coeffs if v not in self._index]
        if unknown:
            raise KeyError(f"constraint references undeclared variables {unknown}")
        self.constraints.append(Constraint(dict(coeffs), lo, hi, name or f"c{len(self.constraints)}"))

    def set_objective(self, coeffs: Mapping[str, float], sense: str = "max") -> None:
        if sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
        unknown = [v for v in coeffs if v not in self._index]
        if unknown:
            raise KeyError(f"objective references undeclared variables {unknown}")
        self.objective = dict(coeffs)
        self.sense = sense

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == BINARY]

    def arrays(self):
        """Dense ``(A, row_lo, row_hi, lb, ub, c)``; ``c`` is already in max form."""
        n = len(self.variables)
        rows = [c for c in self.constraints if any(v != 0 for v in c.coeffs.values())]
        A = np.zeros((len(rows), n))
        for r, con in enumerate(rows):
            for name, a in con.coeffs.items():
                A[r, self._index[name]] += a
        row_lo = np.array([c.lo for c in rows], dtype=float)
        row_hi = np.array([c.hi for c in rows], dtype=float)
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        c = np.zeros(n)
        for name, a in self.objective.items():
            c[self._index[name]] += a
        if self.sense == "min":
            c = -c
        return A, row_lo, row_hi, lb, ub, c, rows

    def evaluate(self, values: np.ndarray) -> float:
        return float(sum(a * values[self._index[k]] for k, a in self.objective.items()))

    def max_violation(self, values: np.ndarray) -> float:
        """Largest constraint or bound violation of a full assignment."""
        worst = 0.0
        for i, v in enumerate(self.variables):
            worst = max(worst, v.lb - values[i], values[i] - v.ub)
        for con in self.constraints:
            act = sum(a * values[self._index[k]] for k, a in con.coeffs.items())
            worst = max(worst, con.lo - act, act - con.hi)
        return worst


@dataclass
class MilpSolution:
    status: str
    objective: float = math.nan
    assignment: dict[str, float] = field(default_factory=dict)
    proven: bool = True
    nodes: int = 0
    lp_iterations: int = 0

    def __getitem__(self, name: str) -> float:
        return self.assignment[name]

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _fmt(x: float) -> str:
    return repr(float(x))


def _expr(coeffs: Mapping[str, float]) -> str:
    parts = []
    for name, a in coeffs.items():
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(a))} {name}")
    text = " ".join(parts) or "0"
    return text[2:] if text.startswith("+ ") else text


def to_lp_format(model: MilpModel) -> str:
    """Render ``model`` in CPLEX LP text form for diffing against other solvers."""
    lines = ["Maximize" if model.sense == "max" else "Minimize", f" obj: {_expr(model.objective)}", "Subject To"]
    for con in model.constraints:
        body = _expr(con.coeffs)
        if con.relation == "=":
            lines.append(f" {con.name}: {body} = {_fmt(con.hi)}")
        elif con.relation == "<=":
            lines.append(f" {con.name}: {body} <= {_fmt(con.hi)}")
        elif con.relation == ">=":
            lines.append(f" {con.name}: {body} >= {_fmt(con.lo)}")
        else:
            lines.append(f" {con.name}_lo: {body} >= {_fmt(con.lo)}")
            lines.append(f" {con.name}_hi: {body} <= {_fmt(con.hi)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        lo = "-inf" if v.lb == -INF else _fmt(v.lb)
        hi = "+inf" if v.ub == INF else _fmt(v.ub)
        if v.lb == -INF and v.ub == INF:
            lines.append(f" {v.name} free")
        else:
            lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"
