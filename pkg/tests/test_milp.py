import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from wcett.milp import (
    BINARY,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    MilpModel,
    SolverTimeout,
    solve_lp,
    solve_milp,
    to_lp_format,
)
from wcett.milp.simplex import Tableau


def _reference_lp(A, lo, hi, lb, ub, c):
    Aub = np.vstack([A[np.isfinite(hi)], -A[np.isfinite(lo)]])
    bub = np.concatenate([hi[np.isfinite(hi)], -lo[np.isfinite(lo)]])
    bounds = list(zip(np.where(np.isfinite(lb), lb, None), np.where(np.isfinite(ub), ub, None)))
    res = linprog(-c, A_ub=Aub, b_ub=bub, bounds=bounds, method="highs")
    if res.status == 0:
        return OPTIMAL, -res.fun
    # highs reports some unbounded problems as infeasible; settle it with a feasibility solve
    feas = linprog(np.zeros_like(c), A_ub=Aub, b_ub=bub, bounds=bounds, method="highs")
    return (UNBOUNDED if feas.status == 0 else INFEASIBLE), None


def _random_lp(rng):
    m, n = rng.integers(1, 30), rng.integers(1, 30)
    A = rng.integers(-3, 4, (m, n)).astype(float) * (rng.random((m, n)) < 0.4)
    lo = rng.integers(-10, 3, m).astype(float)
    hi = lo + rng.integers(0, 10, m) * (rng.random(m) < 0.7)
    lo[rng.random(m) < 0.3] = -np.inf
    hi[rng.random(m) < 0.3] = np.inf
    lb = rng.integers(-5, 1, n).astype(float)
    ub = lb + rng.integers(0, 4, n)
    lb[rng.random(n) < 0.2] = -np.inf
    ub[rng.random(n) < 0.3] = np.inf
    c = rng.integers(-3, 4, n).astype(float)
    return A, lo, hi, lb, ub, c


def test_simplex_matches_reference_lp():
    rng = np.random.default_rng(11)
    for _ in range(300):
        args = _random_lp(rng)
        tab = Tableau(*args)
        status = tab.solve()
        ref, val = _reference_lp(*args)
        assert status == ref
        if status == OPTIMAL:
            assert tab.objective == pytest.approx(val, rel=1e-6, abs=1e-6)


def test_degenerate_lp_terminates():
    # many ties at the origin; cycling would blow the iteration cap
    n = 12
    A = np.vstack([np.eye(n), np.ones((1, n)), -np.eye(n)[:-1] + np.eye(n, k=1)[:-1]])
    lo = np.full(A.shape[0], -np.inf)
    hi = np.concatenate([np.ones(n), [n / 2], np.zeros(n - 1)])
    tab = Tableau(A, lo, hi, np.zeros(n), np.full(n, np.inf), np.ones(n))
    assert tab.solve() == OPTIMAL
    assert tab.objective == pytest.approx(n / 2)


def _knapsackish(rng, n_cont, n_bin, m):
    model = MilpModel()
    names = [model.add_var(f"x{i}", ub=float(rng.integers(1, 6))) for i in range(n_cont)]
    names += [model.add_var(f"b{i}", BINARY) for i in range(n_bin)]
    A = rng.integers(-4, 5, (m, len(names))).astype(float)
    hi = rng.integers(0, 10, m).astype(float)
    for r in range(m):
        model.add_constraint(dict(zip(names, A[r])), "<=", hi[r])
    c = rng.integers(-3, 6, len(names)).astype(float)
    model.set_objective(dict(zip(names, c)), "max")
    return model, names, A, hi, c


def _enumerate_binaries(model, names, A, hi, c, n_cont, n_bin):
    best = None
    ub = [model.variables[i].ub for i in range(n_cont)]
    for bits in itertools.product((0.0, 1.0), repeat=n_bin):
        bits = np.array(bits)
        rhs = hi - A[:, n_cont:] @ bits
        fixed = c[n_cont:] @ bits
        if n_cont:
            res = linprog(-c[:n_cont], A_ub=A[:, :n_cont], b_ub=rhs, bounds=[(0, u) for u in ub], method="highs")
            if res.status != 0:
                continue
            val = fixed - res.fun
        else:
            if np.any(rhs < -1e-9):
                continue
            val = fixed
        best = val if best is None else max(best, val)
    return best


def test_branch_and_bound_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(120):
        n_cont, n_bin, m = int(rng.integers(0, 6)), int(rng.integers(1, 8)), int(rng.integers(1, 10))
        model, names, A, hi, c = _knapsackish(rng, n_cont, n_bin, m)
        sol = solve_milp(model)
        ref = _enumerate_binaries(model, names, A, hi, c, n_cont, n_bin)
        if ref is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL and sol.proven
            assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-6)
            x = np.array([sol[nm] for nm in names])
            assert model.max_violation(x) <= 1e-6


def test_equalities_ranges_and_min_sense():
    m = MilpModel()
    m.add_var("x", lb=-5, ub=5)
    m.add_var("y", BINARY)
    m.add_constraint({"x": 1, "y": 1}, "=", 1.5)
    m.add_range({"x": 1}, -1, 2)
    m.set_objective({"x": 1, "y": 3}, "min")
    sol = solve_milp(m)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.5)
    assert sol["y"] == 0 and sol["x"] == pytest.approx(1.5)


def test_unbounded_and_infeasible():
    m = MilpModel()
    m.add_var("x", lb=0)
    m.add_var("b", BINARY)
    m.set_objective({"x": 1})
    assert solve_milp(m).status == UNBOUNDED
    m = MilpModel()
    m.add_var("b", BINARY)
    m.add_constraint({"b": 1}, ">=", 2)
    assert solve_milp(m).status == INFEASIBLE
    assert solve_lp(m).status == INFEASIBLE


def test_heuristic_and_start_are_checked():
    m = MilpModel()
    m.add_var("b0", BINARY)
    m.add_var("b1", BINARY)
    m.add_constraint({"b0": 1, "b1": 1}, "<=", 1)
    m.set_objective({"b0": 2, "b1": 3})
    # an infeasible start must be ignored
    sol = solve_milp(m, start=np.array([1.0, 1.0]), heuristic=lambda x: np.array([1.0, 1.0]))
    assert sol.objective == pytest.approx(3)


def test_node_limit_reports_unproven_incumbent():
    rng = np.random.default_rng(2)
    model = MilpModel()
    n = 14
    for i in range(n):
        model.add_var(f"b{i}", BINARY)
    w = rng.integers(5, 30, n).astype(float)
    model.add_constraint({f"b{i}": w[i] for i in range(n)}, "<=", w.sum() / 2 + 0.5)
    model.set_objective({f"b{i}": w[i] + rng.random() for i in range(n)})
    with pytest.raises(SolverTimeout):
        solve_milp(model, node_limit=1)
    start = np.zeros(n)
    sol = solve_milp(model, node_limit=1, start=start)
    assert not sol.proven
    assert solve_milp(model).proven


def test_binary_cap():
    m = MilpModel()
    for i in range(5):
        m.add_var(f"b{i}", BINARY)
    with pytest.raises(ValueError):
        solve_milp(m, binary_cap=4)


def test_model_errors():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ValueError):
        m.add_var("x")
    with pytest.raises(KeyError):
        m.add_constraint({"y": 1}, "<=", 1)
    with pytest.raises(ValueError):
        m.add_constraint({"x": 1}, "<>", 1)
    with pytest.raises(ValueError):
        m.add_var("z", lb=2, ub=1)


def test_lp_format_dump():
    m = MilpModel()
    m.add_var("w0", lb=-1, ub=1)
    m.add_var("b0", BINARY)
    m.add_var("f", lb=-np.inf, ub=np.inf)
    m.add_range({"w0": 1, "f": -2}, -1, 1, "unit0")
    m.add_constraint({"b0": 1}, "=", 1, "flow")
    m.set_objective({"w0": 1})
    text = to_lp_format(m)
    assert text.startswith("Maximize\n obj: 1.0 w0\nSubject To\n")
    assert " unit0_lo: 1.0 w0 - 2.0 f >= -1.0" in text
    assert " unit0_hi: 1.0 w0 - 2.0 f <= 1.0" in text
    assert " flow: 1.0 b0 = 1.0" in text
    assert " f free" in text
    assert text.rstrip().endswith("Binaries\n b0\nEnd")
