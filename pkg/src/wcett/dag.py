"""Program DAGs, source-to-sink paths and the graph algorithms over them.

A program is modelled as a loop-free control-flow graph with one entry
(``source``) and one exit (``sink``).  Edges carry dense integer ids
``0..|E|-1`` that index every weight or incidence vector in the package.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Hashable, Iterable, Iterator, Sequence

import numpy as np

Vertex = Hashable

DEFAULT_PATH_CAP = 10**6


class DagError(ValueError):
    """Base class for malformed-graph errors."""


class CyclicGraph(DagError):
    pass


class DisconnectedEdge(DagError):
    pass


class BadIds(DagError):
    pass


class TooManyPaths(RuntimeError):
    pass


@dataclass(frozen=True)
class Edge:
    id: int
    tail: Vertex
    head: Vertex


@dataclass(frozen=True)
class PathVec:
    """A source-to-sink path: ordered edge ids plus the size of the edge space."""

    edge_ids: tuple[int, ...]
    n_edges: int

    @cached_property
    def incidence(self) -> np.ndarray:
        vec = np.zeros(self.n_edges)
        vec[list(self.edge_ids)] = 1.0
        return vec

    @cached_property
    def edge_set(self) -> frozenset[int]:
        return frozenset(self.edge_ids)

    def __len__(self) -> int:
        return len(self.edge_ids)

    def length(self, weights: Sequence[float] | np.ndarray) -> float:
        w = np.asarray(weights, dtype=float)
        return float(w[list(self.edge_ids)].sum())


@dataclass(frozen=True)
class ProgramDag:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    source: Vertex
    sink: Vertex
    exclusions: tuple[tuple[int, ...], ...] = field(default=())

    @classmethod
    def build(
        cls,
        vertices: Iterable[Vertex],
        edges: Iterable[tuple[int, Vertex, Vertex] | Edge],
        source: Vertex,
        sink: Vertex,
        exclusions: Iterable[Iterable[int]] = (),
    ) -> "ProgramDag":
        es = [e if isinstance(e, Edge) else Edge(int(e[0]), e[1], e[2]) for e in edges]
        es.sort(key=lambda e: e.id)
        excl = tuple(sorted(tuple(sorted(set(int(i) for i in s))) for s in exclusions))
        return cls(tuple(vertices), tuple(es), source, sink, excl)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def out_edges(self) -> dict[Vertex, tuple[int, ...]]:
        out: dict[Vertex, list[int]] = defaultdict(list)
        for e in self.edges:
            out[e.tail].append(e.id)
        return {v: tuple(sorted(out.get(v, ()))) for v in self.vertices}

    @cached_property
    def in_edges(self) -> dict[Vertex, tuple[int, ...]]:
        inc: dict[Vertex, list[int]] = defaultdict(list)
        for e in self.edges:
            inc[e.head].append(e.id)
        return {v: tuple(sorted(inc.get(v, ()))) for v in self.vertices}

    @cached_property
    def topological_order(self) -> tuple[Vertex, ...]:
        order = _kahn(self)
        if order is None:
            raise CyclicGraph("graph has a cycle")
        return order

    @cached_property
    def path_space_dim(self) -> int:
        """Dimension of the span of all source-to-sink incidence vectors."""
        return self.n_edges - self.n_vertices + 2

    def path(self, edge_ids: Iterable[int]) -> PathVec:
        """Build a PathVec, checking that the edges form a source-to-sink walk."""
        ids = tuple(int(i) for i in edge_ids)
        at = self.source
        for i in ids:
            if not 0 <= i < self.n_edges:
                raise BadIds(f"edge {i} out of range")
            e = self.edges[i]
            if e.tail != at:
                raise ValueError(f"edge {i} does not continue the walk at vertex {at!r}")
            at = e.head
        if at != self.sink or not ids:
            raise ValueError(f"walk {ids} does not end at the sink")
        return PathVec(ids, self.n_edges)

    def path_from_indicator(self, indicator: Sequence[float], tol: float = 0.5) -> PathVec:
        """Follow edges whose indicator exceeds ``tol`` from the source to the sink."""
        ids = []
        at = self.source
        while at != self.sink:
            nxt = [i for i in self.out_edges[at] if indicator[i] > tol]
            if len(nxt) != 1:
                raise ValueError(f"indicator does not describe a single path at {at!r}")
            ids.append(nxt[0])
            at = self.edges[nxt[0]].head
        return PathVec(tuple(ids), self.n_edges)

    def violated_exclusion(self, path: PathVec) -> tuple[int, ...] | None:
        """Smallest (then lexicographically first) exclusion set contained in ``path``."""
        hits = [s for s in self.exclusions if path.edge_set.issuperset(s)]
        if not hits:
            return None
        return min(hits, key=lambda s: (len(s), s))

    def is_feasible(self, path: PathVec) -> bool:
        return self.violated_exclusion(path) is None

    def to_json(self) -> str:
        doc = {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "from": e.tail, "to": e.head} for e in self.edges],
            "source": self.source,
            "sink": self.sink,
            "exclusions": [list(s) for s in self.exclusions],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ProgramDag":
        doc = json.loads(text)
        try:
            dag = cls.build(
                doc["vertices"],
                [(e["id"], e["from"], e["to"]) for e in doc["edges"]],
                doc["source"],
                doc["sink"],
                doc.get("exclusions", []),
            )
        except (KeyError, TypeError) as exc:
            raise BadIds(f"malformed DAG document: {exc}") from exc
        validate(dag)
        return dag

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ProgramDag":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _kahn(dag: ProgramDag) -> tuple[Vertex, ...] | None:
    indeg = {v: 0 for v in dag.vertices}
    succ: dict[Vertex, list[Vertex]] = defaultdict(list)
    for e in dag.edges:
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    rank = {v: i for i, v in enumerate(dag.vertices)}
    ready = [(rank[v], v) for v, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, v = heapq.heappop(ready)
        order.append(v)
        for h in succ[v]:
            indeg[h] -= 1
            if indeg[h] == 0:
                heapq.heappush(ready, (rank[h], h))
    if len(order) != len(dag.vertices):
        return None
    return tuple(order)


def validate(dag: ProgramDag) -> None:
    """Raise a DagError subclass describing the first violated invariant."""
    seen = set()
    dup = [v for v in dag.vertices if v in seen or seen.add(v)]
    if dup:
        raise BadIds(f"duplicate vertices: {dup}")
    ids = [e.id for e in dag.edges]
    if ids != list(range(len(ids))):
        raise BadIds(f"edge ids must be dense 0..{len(ids) - 1}, got {sorted(ids)}")
    bad = [e.id for e in dag.edges if e.tail not in seen or e.head not in seen]
    if bad:
        raise BadIds(f"edges with unknown endpoints: {bad}")
    for name, v in (("source", dag.source), ("sink", dag.sink)):
        if v not in seen:
            raise BadIds(f"{name} {v!r} is not a vertex")
    if dag.source == dag.sink:
        raise BadIds("source and sink coincide")
    for s in dag.exclusions:
        if len(s) < 2:
            raise BadIds(f"exclusion set {list(s)} has fewer than two edges")
        if any(not 0 <= i < len(ids) for i in s):
            raise BadIds(f"exclusion set {list(s)} references unknown edges")

    order = _kahn(dag)
    if order is None:
        rest = _cycle_vertices(dag)
        raise CyclicGraph(f"cycle through vertices {rest}")

    fwd = _reach(dag.source, {e.id: (e.tail, e.head) for e in dag.edges})
    bwd = _reach(dag.sink, {e.id: (e.head, e.tail) for e in dag.edges})
    loose = [e.id for e in dag.edges if e.tail not in fwd or e.head not in bwd]
    if loose:
        raise DisconnectedEdge(f"edges not on any source-to-sink path: {loose}")
    stray = [v for v in dag.vertices if v not in fwd or v not in bwd]
    if stray:
        raise DisconnectedEdge(f"vertices not on any source-to-sink path: {stray}")


def _cycle_vertices(dag: ProgramDag) -> list[Vertex]:
    indeg = {v: 0 for v in dag.vertices}
    for e in dag.edges:
        indeg[e.head] += 1
    stack = [v for v, d in indeg.items() if d == 0]
    while stack:
        v = stack.pop()
        for i in dag.out_edges[v]:
            h = dag.edges[i].head
            indeg[h] -= 1
            if indeg[h] == 0:
                stack.append(h)
    return [v for v in dag.vertices if indeg[v] > 0]


def _reach(start: Vertex, arcs: dict[int, tuple[Vertex, Vertex]]) -> set[Vertex]:
    adj: dict[Vertex, list[Vertex]] = defaultdict(list)
    for a, b in arcs.values():
        adj[a].append(b)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for h in adj[v]:
            if h not in seen:
                seen.add(h)
                stack.append(h)
    return seen


def count_paths(dag: ProgramDag) -> int:
    ways = {v: 0 for v in dag.vertices}
    ways[dag.source] = 1
    for v in dag.topological_order:
        for i in dag.out_edges[v]:
            ways[dag.edges[i].head] += ways[v]
    return ways[dag.sink]


def enumerate_paths(
    dag: ProgramDag, respect_exclusions: bool = False, cap: int = DEFAULT_PATH_CAP
) -> list[PathVec]:
    """All source-to-sink paths in lexicographic edge-id order."""
    total = count_paths(dag)
    if total > cap:
        raise TooManyPaths(f"{total} paths exceed the cap of {cap}")
    out = []
    stack: list[tuple[Vertex, tuple[int, ...]]] = [(dag.source, ())]
    while stack:
        v, prefix = stack.pop()
        if v == dag.sink:
            p = PathVec(prefix, dag.n_edges)
            if not respect_exclusions or dag.is_feasible(p):
                out.append(p)
            continue
        for i in reversed(dag.out_edges[v]):
            stack.append((dag.edges[i].head, prefix + (i,)))
    return out


def _tie_tol(weights: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.abs(weights).max(initial=0.0)))


def extreme_path(
    dag: ProgramDag, weights: Sequence[float] | np.ndarray, sense: str = "max"
) -> tuple[PathVec, float]:
    """Heaviest (or lightest) source-to-sink path by DP over the topological order.

    Ties are broken in favour of the lexicographically smallest edge-id sequence.
    """
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', got {sense!r}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (dag.n_edges,):
        raise ValueError(f"expected {dag.n_edges} weights, got shape {w.shape}")
    sign = 1.0 if sense == "max" else -1.0
    tol = _tie_tol(w)
    best: dict[Vertex, tuple[float, tuple[int, ...]]] = {dag.sink: (0.0, ())}
    for v in reversed(dag.topological_order):
        if v == dag.sink:
            continue
        cand = None
        for i in dag.out_edges[v]:
            h = dag.edges[i].head
            if h not in best:
                continue
            val = sign * w[i] + best[h][0]
            seq = (i,) + best[h][1]
            if cand is None or val > cand[0] + tol or (val >= cand[0] - tol and seq < cand[1]):
                cand = (val, seq)
        if cand is not None:
            best[v] = cand
    val, seq = best[dag.source]
    path = PathVec(seq, dag.n_edges)
    return path, path.length(w)


def paths_by_weight(
    dag: ProgramDag,
    weights: Sequence[float] | np.ndarray,
    sense: str = "max",
    accept: Callable[[PathVec], bool] | None = None,
) -> Iterator[tuple[PathVec, float]]:
    """Yield source-to-sink paths in order of nonincreasing (or nondecreasing) weight.

    Best-first search over path prefixes, guided by the exact DP completion
    value of each vertex.  Paths rejected by ``accept`` are skipped.
    """
    w = np.asarray(weights, dtype=float)
    sign = 1.0 if sense == "max" else -1.0
    sw = sign * w
    togo = {dag.sink: 0.0}
    for v in reversed(dag.topological_order):
        if v == dag.sink:
            continue
        vals = [sw[i] + togo[dag.edges[i].head] for i in dag.out_edges[v] if dag.edges[i].head in togo]
        if vals:
            togo[v] = max(vals)
    heap: list[tuple[float, tuple[int, ...], float, Vertex]] = [
        (-round(togo[dag.source], 9), (), 0.0, dag.source)
    ]
    while heap:
        _, seq, g, v = heapq.heappop(heap)
        if v == dag.sink:
            p = PathVec(seq, dag.n_edges)
            if accept is None or accept(p):
                yield p, p.length(w)
            continue
        for i in dag.out_edges[v]:
            h = dag.edges[i].head
            if h not in togo:
                continue
            g2 = g + sw[i]
            heapq.heappush(heap, (-round(g2 + togo[h], 9), seq + (i,), g2, h))


@dataclass(frozen=True)
class EdgeMapping:
    """Correspondence between a merged graph and the graph it was merged from."""

    groups: tuple[tuple[int, ...], ...]
    n_original: int

    @cached_property
    def merged_of(self) -> np.ndarray:
        out = np.empty(self.n_original, dtype=int)
        for m, grp in enumerate(self.groups):
            out[list(grp)] = m
        return out

    @property
    def n_merged(self) -> int:
        return len(self.groups)

    def expand(self, path: PathVec) -> PathVec:
        ids = tuple(i for m in path.edge_ids for i in self.groups[m])
        return PathVec(ids, self.n_original)

    def contract(self, path: PathVec) -> PathVec:
        ids = []
        for i in path.edge_ids:
            m = int(self.merged_of[i])
            if not ids or ids[-1] != m:
                ids.append(m)
        return PathVec(tuple(ids), self.n_merged)

    def push_weights(self, weights: Sequence[float] | np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        return np.array([w[list(g)].sum() for g in self.groups])


def merge_series(dag: ProgramDag) -> tuple[ProgramDag, EdgeMapping]:
    """Fuse every chain through internal vertices of in- and out-degree one.

    Merged edges are numbered by their first original edge id.  Exclusion
    sets are rewritten onto merged edges; a set whose edges all fall on one
    chain collapses to a single merged edge.
    """
    passthrough = {
        v
        for v in dag.vertices
        if v not in (dag.source, dag.sink) and len(dag.in_edges[v]) == 1 and len(dag.out_edges[v]) == 1
    }
    groups = []
    for e in dag.edges:
        if e.tail in passthrough:
            continue
        chain = [e.id]
        at = e.head
        while at in passthrough:
            nxt = dag.out_edges[at][0]
            chain.append(nxt)
            at = dag.edges[nxt].head
        groups.append(tuple(chain))
    groups.sort(key=lambda g: g[0])
    mapping = EdgeMapping(tuple(groups), dag.n_edges)
    edges = [Edge(m, dag.edges[g[0]].tail, dag.edges[g[-1]].head) for m, g in enumerate(groups)]
    vertices = tuple(v for v in dag.vertices if v not in passthrough)
    excl = sorted({tuple(sorted({int(mapping.merged_of[i]) for i in s})) for s in dag.exclusions})
    merged = ProgramDag(vertices, tuple(edges), dag.source, dag.sink, tuple(excl))
    return merged, mapping
