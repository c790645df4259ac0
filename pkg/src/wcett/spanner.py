"""Basis paths with bounded coefficients, and the basis-only length estimate.

Paths are handled in coordinates of an orthonormal basis ``Q`` of the flow
space (edge vectors conserved at every internal vertex).  The spanner is
grown and improved by determinant swaps: a basis path is replaced whenever
some path more than doubles ``|det|``.  Finding the best replacement for
slot ``i`` is a linear optimisation over paths, solved exactly by the DAG
longest/shortest path oracle with edge weights ``Q @ inv(X)[i]``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .dag import PathVec, ProgramDag, extreme_path, paths_by_weight
from .platform import MeasurementSet

log = logging.getLogger(__name__)

SWAP_FACTOR = 2.0
SWAP_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class NotInSpan(ValueError):
    pass


class MissingMeasurement(KeyError):
    pass


@dataclass(frozen=True)
class PathBasis:
    paths: tuple[PathVec, ...]
    swaps: int = 0
    det_log: tuple[float, ...] = ()

    @classmethod
    def from_paths(cls, paths: Sequence[PathVec]) -> "PathBasis":
        basis = cls(tuple(paths))
        if basis.rank != len(basis.paths):
            raise ValueError("basis paths are linearly dependent")
        return basis

    @cached_property
    def matrix(self) -> np.ndarray:
        if not self.paths:
            return np.zeros((0, 0))
        return np.vstack([p.incidence for p in self.paths])

    @cached_property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.matrix)) if self.paths else 0

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def accuracy_bound(self) -> int:
        """Multiplier of the variation bound for the basis-only estimate."""
        return 2 * len(self.paths)

    def to_json(self) -> str:
        doc = {"paths": [list(p.edge_ids) for p in self.paths], "rank": self.rank}
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str, dag: ProgramDag) -> "PathBasis":
        # refined measurement sets are stored the same way and may be over-complete
        doc = json.loads(text)
        return cls(tuple(dag.path(p) for p in doc["paths"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def flow_space(dag: ProgramDag) -> np.ndarray:
    """Orthonormal columns spanning edge vectors conserved at internal vertices."""
    internal = [v for v in dag.vertices if v not in (dag.source, dag.sink)]
    if not internal:
        return np.eye(dag.n_edges)
    row = {v: k for k, v in enumerate(internal)}
    N = np.zeros((len(internal), dag.n_edges))
    for e in dag.edges:
        if e.tail in row:
            N[row[e.tail], e.id] -= 1.0
        if e.head in row:
            N[row[e.head], e.id] += 1.0
    _, s, vt = np.linalg.svd(N)
    rank = int((s > 1e-10 * max(1.0, s.max(initial=0.0))).sum())
    return vt[rank:].T.copy()


def _best_for_slot(dag: ProgramDag, Q: np.ndarray, row: np.ndarray) -> tuple[PathVec, float]:
    w = Q @ row
    hi, vhi = extreme_path(dag, w, "max")
    lo, vlo = extreme_path(dag, w, "min")
    return (hi, vhi) if abs(vhi) >= abs(vlo) else (lo, vlo)


def compute_spanner(dag: ProgramDag, factor: float = SWAP_FACTOR) -> PathBasis:
    Q = flow_space(dag)
    d = Q.shape[1]
    X = np.eye(d)
    paths: list[PathVec | None] = [None] * d
    for i in range(d):
        p, _ = _best_for_slot(dag, Q, np.linalg.inv(X)[i])
        X[:, i] = Q.T @ p.incidence
        paths[i] = p
    dets = [abs(float(np.linalg.det(X)))]
    swaps = 0
    cap = 10 * d * max(1, int(np.ceil(np.log2(d + 1)))) + 10
    while True:
        Xinv = np.linalg.inv(X)
        for i in range(d):
            p, v = _best_for_slot(dag, Q, Xinv[i])
            if abs(v) > factor + SWAP_TOL:
                X[:, i] = Q.T @ p.incidence
                paths[i] = p
                swaps += 1
                dets.append(abs(float(np.linalg.det(X))))
                break
        else:
            break
        if swaps > cap:
            raise RuntimeError(f"spanner did not settle after {swaps} swaps")
    log.debug("spanner: %d paths, %d swaps", d, swaps)
    return PathBasis(tuple(paths), swaps, tuple(dets))


def express_in_basis(basis: PathBasis, path: PathVec) -> np.ndarray:
    """Coefficients ``c`` with ``sum_b c_b * p_b = p``."""
    B = basis.matrix
    p = path.incidence
    if B.shape[1] != p.shape[0]:
        raise NotInSpan(f"path over {p.shape[0]} edges, basis over {B.shape[1]}")
    c, *_ = np.linalg.lstsq(B.T, p, rcond=None)
    residual = float(np.abs(B.T @ c - p).max(initial=0.0))
    if residual > RESIDUAL_TOL:
        raise NotInSpan(f"path {path.edge_ids} is off the basis span (residual {residual:.3g})")
    return c


@dataclass(frozen=True)
class BaselineEstimate:
    path: PathVec
    predicted: float
    bound: int
    weights: np.ndarray


def baseline_estimate(basis: PathBasis, measurements: MeasurementSet, dag: ProgramDag) -> BaselineEstimate:
    """Longest feasible path under the minimum-norm weights that reproduce the basis lengths."""
    lengths = []
    for p in basis.paths:
        if p not in measurements:
            raise MissingMeasurement(f"basis path {p.edge_ids} has no measurement")
        lengths.append(measurements.length_of(p))
    w = np.linalg.pinv(basis.matrix) @ np.asarray(lengths) if basis.paths else np.zeros(dag.n_edges)
    found = next(paths_by_weight(dag, w, "max", accept=dag.is_feasible), None)
    if found is None:
        raise ValueError("every path violates an exclusion set")
    path, value = found
    return BaselineEstimate(path, value, basis.accuracy_bound, w)
