"""LP relaxation and best-first branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    MilpModel,
    MilpSolution,
    SolverTimeout,
)
from .simplex import Tableau

log = logging.getLogger(__name__)

INT_TOL = 1e-6
CHECK_TOL = 1e-6
DEFAULT_BINARY_CAP = 2000

Heuristic = Callable[[np.ndarray], "np.ndarray | None"]


def _solution(model: MilpModel, status: str, x: np.ndarray | None, c_max: np.ndarray, **kw) -> MilpSolution:
    if x is None:
        return MilpSolution(status, **kw)
    obj = float(c_max @ x)
    if model.sense == "min":
        obj = -obj
    return MilpSolution(status, obj, dict(zip(model.names, (float(v) for v in x))), **kw)


def solve_lp(model: MilpModel) -> MilpSolution:
    """Solve the continuous relaxation (binaries relaxed to [0, 1])."""
    A, lo, hi, lb, ub, c, _ = model.arrays()
    tab = Tableau(A, lo, hi, lb, ub, c)
    status = tab.solve()
    x = tab.values if status == OPTIMAL else None
    return _solution(model, status, x, c, lp_iterations=tab.iterations)


@dataclass(order=True)
class _Node:
    key: tuple[float, int]
    fixes: dict[int, float] = field(compare=False)


class _Incumbent:
    def __init__(self, A, lo, hi, lb, ub, c, binaries):
        self.A, self.lo, self.hi, self.lb, self.ub, self.c = A, lo, hi, lb, ub, c
        self.binaries = np.asarray(binaries, dtype=int)
        self.value = -math.inf
        self.x: np.ndarray | None = None

    def offer(self, x: np.ndarray) -> bool:
        x = np.array(x, dtype=float)
        b = x[self.binaries]
        if np.any(np.abs(b - np.round(b)) > INT_TOL):
            return False
        x[self.binaries] = np.round(b)
        if np.any(x < self.lb - CHECK_TOL) or np.any(x > self.ub + CHECK_TOL):
            return False
        act = self.A @ x
        if np.any(act < self.lo - CHECK_TOL) or np.any(act > self.hi + CHECK_TOL):
            return False
        val = float(self.c @ x)
        if val > self.value:
            self.value, self.x = val, x
            return True
        return False


def solve_milp(
    model: MilpModel,
    *,
    heuristic: Heuristic | None = None,
    start: np.ndarray | None = None,
    node_limit: int | None = None,
    time_limit: float | None = None,
    binary_cap: int = DEFAULT_BINARY_CAP,
    rel_gap: float = 1e-9,
) -> MilpSolution:
    """Best-first branch-and-bound on fractional binaries.

    Branches on the lowest-index fractional binary and dives into the ``= 1``
    child immediately; the ``= 0`` child waits on the best-bound heap.  ``heuristic`` maps an LP relaxation
    point to a candidate full assignment; candidates (and ``start``) are
    only accepted after an explicit feasibility check.  On hitting a node
    or time limit the incumbent is returned with ``proven=False``.
    """
    A, lo, hi, lb, ub, c, _ = model.arrays()
    bins = model.binary_indices
    if len(bins) > binary_cap:
        raise ValueError(f"{len(bins)} binary variables exceed the cap of {binary_cap}")
    tab = Tableau(A, lo, hi, lb, ub, c)
    if not bins:
        status = tab.solve()
        x = tab.values if status == OPTIMAL else None
        return _solution(model, status, x, c, lp_iterations=tab.iterations)

    inc = _Incumbent(A, lo, hi, lb, ub, c, bins)
    if start is not None:
        inc.offer(start)
    t0 = time.perf_counter()
    heap = [_Node((-math.inf, 0), {})]
    seq = 1
    nodes = 0
    proven = True
    dive: _Node | None = None
    while heap or dive is not None:
        diving = dive is not None
        node = dive if diving else heapq.heappop(heap)
        dive = None
        bound = -node.key[0]
        if bound <= inc.value + rel_gap * max(1.0, abs(inc.value)):
            if diving:
                continue
            break
        if (node_limit is not None and nodes >= node_limit) or (
            time_limit is not None and time.perf_counter() - t0 > time_limit
        ):
            proven = False
            break
        nodes += 1
        for j in bins:
            v = node.fixes.get(j)
            if v is None:
                tab.set_bounds(j, 0.0, 1.0)
            else:
                tab.set_bounds(j, v, v)
        status = tab.solve()
        if status == INFEASIBLE:
            continue
        if status == UNBOUNDED:
            if nodes == 1:
                return MilpSolution(UNBOUNDED, nodes=nodes, lp_iterations=tab.iterations)
            continue
        obj = tab.objective
        if obj <= inc.value + rel_gap * max(1.0, abs(inc.value)):
            continue
        x = tab.values
        frac = [j for j in bins if min(x[j], 1.0 - x[j]) > INT_TOL]
        if not frac:
            for j in bins:
                v = float(round(x[j]))
                tab.set_bounds(j, v, v)
            if tab.solve() == OPTIMAL:
                inc.offer(tab.values)
            continue
        if heuristic is not None:
            cand = heuristic(x)
            if cand is not None:
                inc.offer(cand)
        j = frac[0]
        # follow the = 1 child straight away so the warm basis stays close
        up, down = dict(node.fixes), dict(node.fixes)
        up[j], down[j] = 1.0, 0.0
        dive = _Node((-obj, seq), up)
        heapq.heappush(heap, _Node((-obj, seq + 1), down))
        seq += 2

    log.debug("branch-and-bound: %d nodes, %d pivots, proven=%s", nodes, tab.iterations, proven)
    if inc.x is None:
        if not proven:
            raise SolverTimeout(f"no integral solution within {nodes} nodes")
        return MilpSolution(INFEASIBLE, nodes=nodes, lp_iterations=tab.iterations)
    return _solution(model, OPTIMAL, inc.x, c, proven=proven, nodes=nodes, lp_iterations=tab.iterations)
