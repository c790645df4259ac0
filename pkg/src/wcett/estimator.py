"""Worst-case path estimation from end-to-end path measurements.

Three optimisation models drive everything here:

* ``solve_delta``: smallest window half-width ``D`` for which some
  nonnegative edge weights reproduce every measurement to within ``D`` (LP).
* ``solve_worst``: the longest path any window-consistent weighting allows
  (MILP over flow binaries ``b`` and path-restricted weights ``p``).
* ``solve_bound``: the accuracy constant ``k``, the most any path's length
  can reach when every measured path's length is held in ``[-1, 1]``
  (MILP over free-sign weights).

A predicted length ``T`` is then sound to within ``2 k D``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from itertools import islice
from typing import Callable, Sequence

import numpy as np

from .dag import EdgeMapping, PathVec, ProgramDag, merge_series, paths_by_weight
from .milp import BINARY, CONTINUOUS, INFEASIBLE, OPTIMAL, MilpModel, solve_lp, solve_milp
from .milp.model import MilpError
from .platform import MeasurementSet, PlatformModel, measure
from .spanner import compute_spanner

WINDOW_SLACK = 1e-9
K_TOL = 1e-7

Cut = tuple[int, ...]
Oracle = Callable[[PathVec], "Cut | None"]


class InfeasibleWindows(ValueError):
    """The measurement windows admit no nonnegative weights at this ``D``."""


class NoPathLeft(LookupError):
    """Every path is excluded by the current cuts."""


@dataclass(frozen=True)
class RepeatabilityEstimate:
    D: float
    fitted_weights: np.ndarray


@dataclass(frozen=True)
class AccuracyConstant:
    k: float
    witness_path: PathVec
    witness_weights: np.ndarray
    proven: bool = True
    nodes: int = 0


@dataclass(frozen=True)
class WorstPath:
    path: PathVec
    predicted: float
    weights: np.ndarray
    proven: bool = True
    nodes: int = 0


# -- shared model pieces ------------------------------------------------------


def _flow_model(dag: ProgramDag, w_lo: np.ndarray, w_hi: np.ndarray, p_lo: np.ndarray, p_hi: np.ndarray):
    """Variables w_e, b_e, p_e (in that index order) plus unit-flow rows on ``b``."""
    m = MilpModel()
    n = dag.n_edges
    for e in range(n):
        m.add_var(f"w{e}", CONTINUOUS, float(w_lo[e]), float(w_hi[e]))
    for e in range(n):
        m.add_var(f"b{e}", BINARY)
    for e in range(n):
        m.add_var(f"p{e}", CONTINUOUS, float(p_lo[e]), float(p_hi[e]))
    m.add_constraint({f"b{i}": 1.0 for i in dag.out_edges[dag.source]}, "=", 1.0, "leave_source")
    m.add_constraint({f"b{i}": 1.0 for i in dag.in_edges[dag.sink]}, "=", 1.0, "enter_sink")
    for v in dag.vertices:
        if v in (dag.source, dag.sink):
            continue
        coeffs = {f"b{i}": 1.0 for i in dag.in_edges[v]}
        for i in dag.out_edges[v]:
            coeffs[f"b{i}"] = coeffs.get(f"b{i}", 0.0) - 1.0
        m.add_constraint(coeffs, "=", 0.0, f"conserve_{v}")
    return m


def _add_cuts(model: MilpModel, cuts: Sequence[Cut]) -> None:
    for k, cut in enumerate(cuts):
        model.add_constraint({f"b{i}": 1.0 for i in cut}, "<=", len(cut) - 1.0, f"cut{k}")


def _hits_cut(path: PathVec, cuts: Sequence[Cut]) -> bool:
    s = path.edge_set
    return any(all(i in s for i in cut) for cut in cuts)


def _best_uncut(dag: ProgramDag, weights: np.ndarray, cuts: Sequence[Cut], sense: str = "max"):
    accept = (lambda p: not _hits_cut(p, cuts)) if cuts else None
    return next(islice(paths_by_weight(dag, weights, sense, accept=accept), 1), None)


def _path_assignment(n: int, w: np.ndarray, path: PathVec) -> np.ndarray:
    b = path.incidence
    return np.concatenate([w, b, w * b])


# -- repeatability: smallest consistent window ------------------------------


def solve_delta(dag: ProgramDag, measurements: MeasurementSet) -> RepeatabilityEstimate:
    if len(measurements) == 0:
        raise ValueError("need at least one measurement")
    n = dag.n_edges
    m = MilpModel()
    for e in range(n):
        m.add_var(f"w{e}")
    m.add_var("mu")
    for k, (path, length) in enumerate(measurements):
        row = {f"w{e}": 1.0 for e in path.edge_ids}
        m.add_constraint({**row, "mu": 1.0}, ">=", length, f"lo{k}")
        m.add_constraint({**row, "mu": -1.0}, "<=", length, f"hi{k}")
    m.set_objective({"mu": 1.0}, "min")
    sol = solve_lp(m)
    if sol.status != OPTIMAL:
        raise MilpError(f"window LP returned {sol.status}")
    w = np.array([max(sol[f"w{e}"], 0.0) for e in range(n)])
    return RepeatabilityEstimate(max(sol["mu"], 0.0), w)


# -- longest window-consistent path -----------------------------------------


def weight_caps(dag: ProgramDag, measurements: MeasurementSet, D: float) -> np.ndarray:
    """Upper bound on each edge weight implied by the windows.

    A covered edge can never exceed the upper window of a path through it;
    an edge no measurement touches is capped at the largest length plus one.
    """
    loose = float(measurements.lengths.max(initial=0.0)) + 1.0
    caps = np.full(dag.n_edges, np.inf)
    for path, length in measurements:
        idx = list(path.edge_ids)
        caps[idx] = np.minimum(caps[idx], length + D)
    caps[~np.isfinite(caps)] = loose
    return np.maximum(caps, 0.0)


def worst_model(dag: ProgramDag, measurements: MeasurementSet, D: float, cuts: Sequence[Cut] = ()) -> MilpModel:
    n = dag.n_edges
    M = weight_caps(dag, measurements, D)
    zeros = np.zeros(n)
    m = _flow_model(dag, zeros, M, zeros, M)
    for k, (path, length) in enumerate(measurements):
        m.add_range({f"w{e}": 1.0 for e in path.edge_ids}, length - D, length + D, f"window{k}")
    for e in range(n):
        m.add_constraint({f"p{e}": 1.0, f"w{e}": -1.0}, "<=", 0.0, f"p_le_w{e}")
        m.add_constraint({f"p{e}": 1.0, f"b{e}": -float(M[e])}, "<=", 0.0, f"p_le_Mb{e}")
    _add_cuts(m, cuts)
    m.set_objective({f"p{e}": 1.0 for e in range(n)}, "max")
    return m


def solve_worst(
    dag: ProgramDag,
    measurements: MeasurementSet,
    D: float,
    cuts: Sequence[Cut] = (),
    *,
    start_weights: np.ndarray | None = None,
    node_limit: int | None = None,
    time_limit: float | None = None,
) -> WorstPath:
    n = dag.n_edges
    model = worst_model(dag, measurements, D, cuts)
    caps = weight_caps(dag, measurements, D)

    def complete(w):
        w = np.clip(w, 0.0, caps)
        found = _best_uncut(dag, w, cuts)
        return None if found is None else _path_assignment(n, w, found[0])

    start = complete(np.asarray(start_weights, float)) if start_weights is not None else None
    sol = solve_milp(
        model,
        heuristic=lambda x: complete(x[:n]),
        start=start,
        node_limit=node_limit,
        time_limit=time_limit,
    )
    if sol.status == INFEASIBLE:
        if D + 1e-7 >= solve_delta(dag, measurements).D:
            raise NoPathLeft("no path survives the cuts")
        raise InfeasibleWindows(f"no nonnegative weights fit the measurements within D={D}")
    if sol.status != OPTIMAL:
        raise MilpError(f"longest-path MILP returned {sol.status}")
    b = np.array([sol[f"b{e}"] for e in range(n)])
    w = np.array([sol[f"w{e}"] for e in range(n)])
    path = dag.path_from_indicator(b)
    return WorstPath(path, sol.objective, w, sol.proven, sol.nodes)


# -- accuracy constant --------------------------------------------------------


def _unmeasured_direction(dag: ProgramDag, P: np.ndarray, cuts: Sequence[Cut]):
    """An uncut path outside the span of the measured rows, with a weighting proving it."""
    if P.shape[0] == 0:
        Z = np.eye(dag.n_edges)
    else:
        _, s, vt = np.linalg.svd(P)
        rank = int((s > 1e-10 * max(1.0, s.max(initial=0.0))).sum())
        Z = vt[rank:].T
    for j in range(Z.shape[1]):
        z = Z[:, j]
        for sense in ("max", "min"):
            found = _best_uncut(dag, z, cuts, sense)
            if found is not None and abs(found[1]) > 1e-7:
                return found[0], z / found[1]
    return None


def bound_caps(P: np.ndarray) -> np.ndarray:
    """Per-edge bound on |w_e| for the length-maximising weights.

    Only the part of ``w`` in the row space of ``P`` affects measured and
    (when they span) unmeasured lengths, and that part is ``pinv(P) @ s``
    with every ``|s_i| <= 1``, hence bounded by the row 1-norms of ``pinv(P)``.
    """
    return np.abs(np.linalg.pinv(P)).sum(axis=1) * (1 + 1e-7) + 1e-9


def bound_model(dag: ProgramDag, P: np.ndarray, cuts: Sequence[Cut] = (), sign: float = 1.0) -> MilpModel:
    n = dag.n_edges
    M = bound_caps(P)
    m = _flow_model(dag, -M, M, -M, M)
    for k, row in enumerate(P):
        m.add_range({f"w{e}": 1.0 for e in np.flatnonzero(row)}, -1.0, 1.0, f"unit{k}")
    for e in range(n):
        Me = float(M[e])
        if sign > 0:
            # p <= w when b = 1, p <= 0 when b = 0
            m.add_constraint({f"p{e}": 1.0, f"w{e}": -1.0, f"b{e}": Me}, "<=", Me, f"p_le_w{e}")
            m.add_constraint({f"p{e}": 1.0, f"b{e}": -Me}, "<=", 0.0, f"p_le_Mb{e}")
        else:
            m.add_constraint({f"p{e}": 1.0, f"w{e}": -1.0, f"b{e}": -Me}, ">=", -Me, f"p_ge_w{e}")
            m.add_constraint({f"p{e}": 1.0, f"b{e}": Me}, ">=", 0.0, f"p_ge_Mb{e}")
    _add_cuts(m, cuts)
    m.set_objective({f"p{e}": sign for e in range(n)}, "max")
    return m


def solve_bound(
    dag: ProgramDag,
    measured_paths: Sequence[PathVec],
    cuts: Sequence[Cut] = (),
    *,
    both_signs: bool = False,
    node_limit: int | None = None,
    time_limit: float | None = None,
) -> AccuracyConstant:
    """Accuracy constant ``k`` of a measured path set.

    ``k`` is infinite when some uncut path lies outside the measured span.
    The model is symmetric under ``w -> -w``, so maximising ``-len`` gives
    the same optimum as ``len``; ``both_signs`` solves it explicitly anyway.
    """
    n = dag.n_edges
    unique = {p.edge_ids: p for p in measured_paths}
    P = np.vstack([p.incidence for p in unique.values()]) if unique else np.zeros((0, n))
    escape = _unmeasured_direction(dag, P, cuts)
    if escape is not None:
        return AccuracyConstant(math.inf, escape[0], escape[1])
    if _best_uncut(dag, np.zeros(n), cuts) is None:
        raise NoPathLeft("every path is cut")
    M = bound_caps(P)
    found = []
    for sign in (1.0, -1.0) if both_signs else (1.0,):

        def complete(w, sign=sign):
            w = np.clip(w, -M, M)
            hit = _best_uncut(dag, sign * w, cuts)
            return None if hit is None else _path_assignment(n, w, hit[0])

        sol = solve_milp(
            bound_model(dag, P, cuts, sign),
            heuristic=lambda x, f=complete: f(x[:n]),
            start=complete(np.zeros(n)),
            node_limit=node_limit,
            time_limit=time_limit,
        )
        if sol.status != OPTIMAL:
            raise MilpError(f"accuracy MILP returned {sol.status}")
        w = np.array([sol[f"w{e}"] for e in range(n)])
        path = dag.path_from_indicator([sol[f"b{e}"] for e in range(n)])
        found.append(AccuracyConstant(max(sol.objective, 0.0), path, sign * w, sol.proven, sol.nodes))
    best = max(found, key=lambda a: a.k)
    return replace(best, proven=all(a.proven for a in found), nodes=sum(a.nodes for a in found))


def unmeasured_witness(dag: ProgramDag, path: PathVec) -> np.ndarray:
    """Weights giving ``path`` length ``1 + 1/|E|`` while no other path exceeds 1 in magnitude.

    The first edge of ``path`` carries ``1 + 1/|E|``; every edge that leaves a
    vertex of ``path`` without following it carries ``-1/|E|``.  Any other
    path shares a prefix with ``path`` and then departs through one such edge.
    """
    n = dag.n_edges
    w = np.zeros(n)
    on = path.edge_set
    for i in path.edge_ids:
        for j in dag.out_edges[dag.edges[i].tail]:
            if j not in on:
                w[j] = -1.0 / n
    w[path.edge_ids[0]] = 1.0 + 1.0 / n
    return w


# -- iterative basis refinement ----------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    k: float
    seconds: float
    added: tuple[int, ...] | None = None
    cut: tuple[int, ...] | None = None


@dataclass
class BasisResult:
    paths: list[PathVec]
    k: float
    cuts: list[Cut]
    history: list[IterationRecord] = field(default_factory=list)
    proven: bool = True


def iterative_basis(
    dag: ProgramDag,
    accuracy: float,
    initial: Sequence[PathVec],
    oracle: Oracle | None = None,
    cuts: Sequence[Cut] = (),
    *,
    add_paths: bool = True,
    max_iterations: int | None = None,
) -> BasisResult:
    """Grow the measured set until its accuracy constant is at most ``accuracy``.

    Each round solves for the worst unmeasured path.  A feasible one joins
    the set; an infeasible one contributes its violated exclusion set as a
    cut.  With ``add_paths=False`` only cuts are added, which turns this
    into the accuracy constant of a fixed set over feasible paths.
    """
    if accuracy < 1:
        raise ValueError("accuracy target must be at least 1")
    oracle = oracle or dag.violated_exclusion
    paths = list({p.edge_ids: p for p in initial}.values())
    cuts = list(cuts)
    history: list[IterationRecord] = []
    proven = True
    t0 = time.perf_counter()
    added: tuple[int, ...] | None = None
    cut: tuple[int, ...] | None = None
    while True:
        res = solve_bound(dag, paths, cuts)
        proven &= res.proven
        history.append(IterationRecord(res.k, time.perf_counter() - t0, added, cut))
        core = oracle(res.witness_path)
        if core is None and res.k <= accuracy + K_TOL:
            return BasisResult(paths, res.k, cuts, history, proven)
        if core is None and not add_paths:
            return BasisResult(paths, res.k, cuts, history, proven)
        if max_iterations is not None and len(history) > max_iterations:
            raise RuntimeError(f"no accuracy {accuracy} after {max_iterations} iterations")
        added = cut = None
        if core is not None:
            cut = tuple(core)
            cuts.append(cut)
        else:
            added = res.witness_path.edge_ids
            paths.append(res.witness_path)


# -- end-to-end ----------------------------------------------------------------


@dataclass(frozen=True)
class RankedPath:
    path: PathVec
    edges: tuple[int, ...]
    predicted: float
    measured: float | None


@dataclass
class EstimateReport:
    ranked: list[RankedPath]
    k: float
    D: float
    band_halfwidth: float
    proven: bool
    iterations: list[IterationRecord]
    measured_paths: list[PathVec]
    measurements: MeasurementSet
    stats: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "k": self.k,
            "D": self.D,
            "band": self.band_halfwidth,
            "paths": [{"edges": list(r.edges), "predicted": r.predicted, "measured": r.measured} for r in self.ranked],
            "iterations": [{"k": it.k, "seconds": it.seconds if timing else None} for it in self.iterations],
        }


def estimate_wcett(
    dag: ProgramDag,
    *,
    platform: PlatformModel | None = None,
    measurements: MeasurementSet | None = None,
    accuracy: float = 2.0,
    top: int = 1,
    early_stop: bool = False,
    merge: bool = True,
) -> EstimateReport:
    """Measure (or load) a basis, fit the repeatability window, rank the longest paths.

    With a platform, a spanner is refined until its accuracy constant is at
    most ``accuracy`` and every selected path is measured.  With a fixed
    measurement set, ``accuracy`` is not enforced; the constant of the
    given set is reported (possibly infinite).
    """
    if (platform is None) == (measurements is None):
        raise ValueError("give exactly one of platform or measurements")
    if top < 1:
        raise ValueError("top must be at least 1")
    if merge:
        work, mapping = merge_series(dag)
    else:
        work, mapping = dag, EdgeMapping(tuple((i,) for i in range(dag.n_edges)), dag.n_edges)
    oracle = work.violated_exclusion

    if platform is not None:
        seed = [p for p in compute_spanner(work).paths if work.is_feasible(p)]
        basis = iterative_basis(work, accuracy, seed, oracle)
        observed = MeasurementSet((p, measure(platform, mapping.expand(p))) for p in basis.paths)
    else:
        observed = MeasurementSet(((mapping.contract(p), l) for p, l in measurements), unique=measurements.unique)
        basis = iterative_basis(work, max(accuracy, 1.0), observed.paths, oracle, add_paths=False)

    fit = solve_delta(work, observed)
    D = fit.D
    band = 2.0 * basis.k * D if D > 0 else 0.0
    cuts = list(basis.cuts)
    ranked: list[RankedPath] = []
    proven = basis.proven
    start = fit.fitted_weights
    solves = 0
    while len(ranked) < top:
        try:
            worst = solve_worst(work, observed, D + WINDOW_SLACK, cuts, start_weights=start)
        except NoPathLeft:
            break
        solves += 1
        proven &= worst.proven
        core = oracle(worst.path)
        if core is not None:
            cuts.append(tuple(core))
            continue
        if early_stop and ranked and worst.predicted < ranked[0].predicted - band:
            break
        original = mapping.expand(worst.path)
        if platform is not None:
            seen = measure(platform, original)
        else:
            seen = observed.length_of(worst.path) if worst.path in observed else None
        ranked.append(RankedPath(worst.path, original.edge_ids, worst.predicted, seen))
        cuts.append(worst.path.edge_ids)
        start = worst.weights
    stats = {"merged_edges": work.n_edges, "measured": len(basis.paths), "milp_solves": solves}
    return EstimateReport(ranked, basis.k, D, band, proven, basis.history, basis.paths, observed, stats)


# -- side-by-side with the basis-only estimate --------------------------------


@dataclass(frozen=True)
class Comparison:
    basis_paths: int
    baseline_bound: float
    edge_bound: float
    refined_bound: float
    k: float
    D: float
    baseline_predicted: float
    baseline_measured: float
    refined_predicted: float
    refined_measured: float

    def row(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def compare_baseline(dag: ProgramDag, platform: PlatformModel) -> Comparison:
    """Run the basis-only and the refined estimate on the same spanner measurements.

    Every spanner path is measured, including any that violate an
    exclusion set, because the basis-only estimate needs all of them.
    """
    from .spanner import baseline_estimate

    work, mapping = merge_series(dag)
    basis = compute_spanner(work)
    observed = MeasurementSet((p, measure(platform, mapping.expand(p))) for p in basis.paths)
    base = baseline_estimate(basis, observed, work)
    feasible = MeasurementSet((p, l) for p, l in observed if work.is_feasible(p))
    fixed = iterative_basis(work, 1.0, feasible.paths, add_paths=False)
    fit = solve_delta(work, feasible)
    cuts = list(fixed.cuts)
    while True:
        worst = solve_worst(work, feasible, fit.D + WINDOW_SLACK, cuts, start_weights=fit.fitted_weights)
        core = work.violated_exclusion(worst.path)
        if core is None:
            break
        cuts.append(tuple(core))
    return Comparison(
        len(basis),
        float(basis.accuracy_bound),
        2.0 * work.n_edges,
        2.0 * fixed.k,
        fixed.k,
        fit.D,
        base.predicted,
        measure(platform, mapping.expand(base.path)),
        worst.predicted,
        measure(platform, mapping.expand(worst.path)),
    )
