"""Synthetic benchmark families: diamond chains and layered random DAGs."""

from __future__ import annotations

import numpy as np

from .dag import PathVec, ProgramDag, count_paths, extreme_path, validate
from .platform import ADVERSARIAL, UNIFORM, PlatformModel


def diamond_chain(n: int) -> ProgramDag:
    """``n`` diamonds in series; edges per diamond: in-top, in-bottom, top-out, bottom-out."""
    if n < 1:
        raise ValueError("need at least one diamond")
    vertices = [0]
    edges = []
    join = 0
    for i in range(n):
        top, bot, nxt = 3 * i + 1, 3 * i + 2, 3 * i + 3
        vertices += [top, bot, nxt]
        base = 4 * i
        edges += [(base, join, top), (base + 1, join, bot), (base + 2, top, nxt), (base + 3, bot, nxt)]
        join = nxt
    return ProgramDag.build(vertices, edges, 0, join)


def layered_dag(layers: int, width: int, prob: float, seed: int, exclusions: int = 0) -> ProgramDag:
    """Source, ``layers`` layers of ``width`` vertices, sink.

    Consecutive layers are joined edge-by-edge with probability ``prob``;
    every vertex then gets at least one in- and one out-edge.  Optional
    exclusion sets pair two edges from different layer gaps, and are kept
    only while some feasible path survives.
    """
    if layers < 1 or width < 1 or not 0 <= prob <= 1:
        raise ValueError("bad layered-graph parameters")
    rng = np.random.default_rng(seed)
    src, sink = 0, layers * width + 1
    node = lambda l, i: 1 + l * width + i  # noqa: E731
    arcs = [(src, node(0, i)) for i in range(width)]
    for l in range(layers - 1):
        here = set()
        for i in range(width):
            for j in range(width):
                if rng.random() < prob:
                    here.add((i, j))
        for i in range(width):
            if not any(a == i for a, _ in here):
                here.add((i, int(rng.integers(width))))
        for j in range(width):
            if not any(b == j for _, b in here):
                here.add((int(rng.integers(width)), j))
        arcs += [(node(l, i), node(l + 1, j)) for i, j in sorted(here)]
    arcs += [(node(layers - 1, i), sink) for i in range(width)]
    edges = [(k, a, b) for k, (a, b) in enumerate(arcs)]
    vertices = list(range(sink + 1))
    dag = ProgramDag.build(vertices, edges, src, sink)
    validate(dag)
    if exclusions:
        dag = _add_exclusions(dag, exclusions, rng)
    return dag


def _add_exclusions(dag: ProgramDag, count: int, rng: np.random.Generator) -> ProgramDag:
    from .dag import paths_by_weight

    inner = [e for e in dag.edges if e.tail != dag.source and e.head != dag.sink]
    sets: list[tuple[int, ...]] = []
    for _ in range(20 * count):
        if len(sets) >= count or len(inner) < 2:
            break
        a, b = rng.choice(len(inner), 2, replace=False)
        pair = tuple(sorted((inner[a].id, inner[b].id)))
        if pair in sets or dag.edges[pair[0]].tail == dag.edges[pair[1]].tail:
            continue
        trial = ProgramDag(dag.vertices, dag.edges, dag.source, dag.sink, tuple(sorted(sets + [pair])))
        feasible = next(paths_by_weight(trial, np.zeros(dag.n_edges), accept=trial.is_feasible), None)
        if feasible is not None:
            sets.append(pair)
    return ProgramDag(dag.vertices, dag.edges, dag.source, dag.sink, tuple(sorted(sets)))


def random_weights(n_edges: int, seed: int, low: int = 1, high: int = 100) -> np.ndarray:
    return np.random.default_rng(seed).integers(low, high + 1, n_edges).astype(float)


def random_path(dag: ProgramDag, rng: np.random.Generator) -> PathVec:
    """A source-to-sink path drawn uniformly over all paths."""
    ways = {dag.sink: 1}
    for v in reversed(dag.topological_order):
        if v != dag.sink:
            ways[v] = sum(ways[dag.edges[i].head] for i in dag.out_edges[v])
    ids = []
    at = dag.source
    while at != dag.sink:
        outs = dag.out_edges[at]
        counts = np.array([ways[dag.edges[i].head] for i in outs], dtype=float)
        pick = outs[int(rng.choice(len(outs), p=counts / counts.sum()))]
        ids.append(pick)
        at = dag.edges[pick].head
    return PathVec(tuple(ids), dag.n_edges)


def make_platform(
    dag: ProgramDag,
    seed: int,
    mu_max: float = 0.0,
    law: str = UNIFORM,
    weights: np.ndarray | None = None,
    clamp: bool = True,
) -> PlatformModel:
    """Random integer edge costs in [1, 100] plus a perturbation law.

    With ``clamp`` the variation bound is capped at the lightest path's
    baseline so no measured length can go negative.  The adversarial law
    hides ``+mu_max`` on one uniformly drawn path.
    """
    w = random_weights(dag.n_edges, seed) if weights is None else np.asarray(weights, dtype=float)
    if clamp:
        _, lightest = extreme_path(dag, w, "min")
        mu_max = min(mu_max, lightest)
    adv = {}
    if law == ADVERSARIAL:
        hidden = random_path(dag, np.random.default_rng([seed, 1]))
        adv = {hidden.edge_ids: float(mu_max)}
    return PlatformModel(tuple(float(x) for x in w), float(mu_max), law, seed, adv)


def describe(dag: ProgramDag) -> tuple[int, int, int]:
    return dag.n_vertices, dag.n_edges, count_paths(dag)
