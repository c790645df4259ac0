import math

import numpy as np
import pytest

from oracles import bound_by_enumeration, feasible_paths, lp_unit_bound, mindelta_by_lp, worst_by_enumeration
from wcett.dag import ProgramDag, enumerate_paths, merge_series
from wcett.estimator import (
    InfeasibleWindows,
    NoPathLeft,
    bound_model,
    compare_baseline,
    estimate_wcett,
    iterative_basis,
    solve_bound,
    solve_delta,
    solve_worst,
    unmeasured_witness,
    worst_model,
)
from wcett.generate import diamond_chain, layered_dag, make_platform
from wcett.milp import to_lp_format
from wcett.platform import ADVERSARIAL, MeasurementSet, measure_all
from wcett.spanner import compute_spanner


def one_swap_paths(merged):
    top = [0, 2, 4]
    out = [merged.path(top)]
    for i in range(3):
        ids = list(top)
        ids[i] = 2 * i + 1
        out.append(merged.path(ids))
    return out


# -- window fit -----------------------------------------------------------------


def test_delta_zero_when_consistent(small_layered):
    pl = make_platform(small_layered, 1)
    ms = measure_all(pl, enumerate_paths(small_layered))
    fit = solve_delta(small_layered, ms)
    assert fit.D == pytest.approx(0, abs=1e-6)


def test_delta_same_path_twice(two_paths):
    p = two_paths.path([0, 2])
    ms = MeasurementSet([(p, 10), (p, 14)], unique=False)
    assert solve_delta(two_paths, ms).D == pytest.approx(2)


def test_delta_matches_lp_oracle_and_windows():
    for seed in range(12):
        g = layered_dag(4, 3, 0.5, seed)
        pl = make_platform(g, seed, mu_max=8.0)
        ms = measure_all(pl, enumerate_paths(g))
        fit = solve_delta(g, ms)
        assert fit.D == pytest.approx(mindelta_by_lp(g, ms), abs=1e-6)
        assert fit.D <= pl.mu_max + 1e-9
        assert np.all(fit.fitted_weights >= 0)
        for p, l in ms:
            assert abs(p.length(fit.fitted_weights) - l) <= fit.D + 1e-6


# -- longest consistent path ------------------------------------------------------


def test_worst_two_paths_forced(two_paths):
    ms = MeasurementSet([(two_paths.path([0, 2]), 10), (two_paths.path([1, 3]), 20)])
    res = solve_worst(two_paths, ms, 0.0)
    assert res.predicted == pytest.approx(20)
    assert res.path.edge_ids == (1, 3)


def test_worst_one_swap_basis_unit_weights(chain3_merged):
    # merged edges stand for two unit edges each
    ms = MeasurementSet((p, 6.0) for p in one_swap_paths(chain3_merged))
    assert solve_worst(chain3_merged, ms, 0.0).predicted == pytest.approx(6)


def test_worst_exact_with_all_paths(small_layered):
    merged, mapping = merge_series(small_layered)
    pl = make_platform(small_layered, 3)
    ms = MeasurementSet((p, pl.baseline(mapping.expand(p))) for p in enumerate_paths(merged))
    res = solve_worst(merged, ms, 1e-9)
    truth = max(pl.baseline(p) for p in enumerate_paths(small_layered))
    assert res.predicted == pytest.approx(truth, abs=1e-6)
    assert pl.baseline(mapping.expand(res.path)) == pytest.approx(truth, abs=1e-6)


def test_worst_matches_enumeration_oracle():
    rng = np.random.default_rng(0)
    for trial in range(25):
        g = merge_series(layered_dag(3 + trial % 3, 3, 0.5, trial))[0]
        pl = make_platform(g, trial, mu_max=float(rng.choice([0, 2, 10])))
        seed = list(compute_spanner(g).paths)
        ms = measure_all(pl, seed)
        D = solve_delta(g, ms).D + 1e-9
        res = solve_worst(g, ms, D)
        ref = worst_by_enumeration(g, ms, D)
        assert res.predicted == pytest.approx(ref, rel=1e-5)
        for p, l in ms:
            assert abs(p.length(res.weights) - l) <= D + 1e-6


def test_worst_cuts_and_exhaustion(two_paths):
    ms = MeasurementSet([(two_paths.path([0, 2]), 10), (two_paths.path([1, 3]), 20)])
    res = solve_worst(two_paths, ms, 0.0, cuts=[(1, 3)])
    assert res.path.edge_ids == (0, 2)
    with pytest.raises(NoPathLeft):
        solve_worst(two_paths, ms, 0.0, cuts=[(1, 3), (0, 2)])


def test_worst_infeasible_windows(two_paths):
    p = two_paths.path([0, 2])
    ms = MeasurementSet([(p, 10), (p, 14)], unique=False)
    with pytest.raises(InfeasibleWindows):
        solve_worst(two_paths, ms, 1.0)
    assert solve_worst(two_paths, ms, 2.0 + 1e-9).predicted >= 12 - 1e-6


def test_lp_dump_of_models(two_paths):
    ms = MeasurementSet([(two_paths.path([0, 2]), 10)])
    text = to_lp_format(worst_model(two_paths, ms, 1.0, cuts=[(0, 2)]))
    assert "window0_lo: 1.0 w0 + 1.0 w2 >= 9.0" in text
    assert "cut0: 1.0 b0 + 1.0 b2 <= 1.0" in text
    P = np.array([two_paths.path([0, 2]).incidence, two_paths.path([1, 3]).incidence])
    assert "unit1_hi" in to_lp_format(bound_model(two_paths, P))


# -- accuracy constant -----------------------------------------------------------------


def test_bound_one_swap_basis_matches_oracle(chain3_merged):
    measured = one_swap_paths(chain3_merged)
    res = solve_bound(chain3_merged, measured)
    assert res.k == pytest.approx(bound_by_enumeration(chain3_merged, measured), abs=1e-6)
    assert res.k == pytest.approx(5)


def test_bound_is_one_with_every_path(small_layered):
    merged, _ = merge_series(small_layered)
    assert solve_bound(merged, enumerate_paths(merged)).k == pytest.approx(1, abs=1e-6)


def test_bound_matches_oracle_on_random_subsets(small_layered):
    merged, _ = merge_series(small_layered)
    paths = enumerate_paths(merged)
    rng = np.random.default_rng(1)
    spanner = list(compute_spanner(merged).paths)
    for _ in range(4):
        extra = [paths[i] for i in rng.choice(len(paths), min(3, len(paths)), replace=False)]
        measured = list({p.edge_ids: p for p in spanner + extra}.values())
        res = solve_bound(merged, measured)
        ref = bound_by_enumeration(merged, measured)
        assert res.k == pytest.approx(ref, rel=1e-6, abs=1e-6)
        assert lp_unit_bound(res.witness_path, measured) == pytest.approx(res.k, rel=1e-6, abs=1e-6)


def test_bound_infinite_outside_span(chain3_merged):
    measured = one_swap_paths(chain3_merged)[:2]
    res = solve_bound(chain3_merged, measured)
    assert math.isinf(res.k)
    w = res.witness_weights
    assert res.witness_path.length(w) == pytest.approx(1)
    assert all(abs(p.length(w)) < 1e-9 for p in measured)


def test_bound_signs_agree(chain3_merged):
    for g in (chain3_merged, merge_series(layered_dag(4, 3, 0.5, 2))[0]):
        S = list(compute_spanner(g).paths)
        one = solve_bound(g, S)
        two = solve_bound(g, S, both_signs=True)
        assert one.k == pytest.approx(two.k, abs=1e-7)


def test_bound_witness_weights_are_feasible():
    g = merge_series(layered_dag(5, 3, 0.4, 0))[0]
    S = list(compute_spanner(g).paths)
    res = solve_bound(g, S)
    for p in S:
        assert abs(p.length(res.witness_weights)) <= 1 + 1e-6
    assert abs(res.witness_path.length(res.witness_weights)) == pytest.approx(res.k, rel=1e-6)


def test_unmeasured_witness_construction(small_layered):
    merged, _ = merge_series(small_layered)
    paths = enumerate_paths(merged)
    n = merged.n_edges
    for target in paths[:6]:
        w = unmeasured_witness(merged, target)
        assert target.length(w) == pytest.approx(1 + 1 / n)
        for p in paths:
            if p != target:
                assert abs(p.length(w)) <= 1 + 1e-12


def test_bound_respects_exclusion_cuts():
    g = diamond_chain(2)
    g = ProgramDag.build(g.vertices, g.edges, g.source, g.sink, [(0, 4)])
    merged, _ = merge_series(g)
    feasible = [p for p in enumerate_paths(merged) if merged.is_feasible(p)]
    assert len(feasible) == 3
    res = solve_bound(merged, feasible, cuts=merged.exclusions)
    assert res.k == pytest.approx(1, abs=1e-6)
    assert solve_bound(merged, feasible).k > 1


# -- refinement ---------------------------------------------------------------------------


def test_accuracy_one_collects_every_path(chain3_merged):
    res = iterative_basis(chain3_merged, 1.0, list(compute_spanner(chain3_merged).paths))
    assert len(res.paths) == 8
    assert {p.edge_ids for p in res.paths} == {p.edge_ids for p in enumerate_paths(chain3_merged)}


def test_loose_target_keeps_initial_set(chain3_merged):
    seed = list(compute_spanner(chain3_merged).paths)
    res = iterative_basis(chain3_merged, 100.0, seed)
    assert res.paths == seed and len(res.history) == 1


def test_target_two_and_monotone_history():
    g = merge_series(layered_dag(5, 3, 0.5, 4))[0]
    res = iterative_basis(g, 2.0, list(compute_spanner(g).paths))
    ks = [it.k for it in res.history]
    assert res.k <= 2 + 1e-7
    assert all(b <= a + 1e-7 for a, b in zip(ks, ks[1:]))
    assert solve_bound(g, res.paths).k == pytest.approx(res.k, abs=1e-7)


def test_refinement_cuts_infeasible_witnesses():
    g = merge_series(layered_dag(4, 3, 0.5, 5, exclusions=3))[0]
    seed = [p for p in compute_spanner(g).paths if g.is_feasible(p)]
    res = iterative_basis(g, 1.0, seed)
    assert all(g.is_feasible(p) for p in res.paths)
    assert {p.edge_ids for p in res.paths} == {p.edge_ids for p in feasible_paths(g)}
    assert all(c in g.exclusions for c in res.cuts)


def test_refinement_rejects_bad_target(chain3_merged):
    with pytest.raises(ValueError):
        iterative_basis(chain3_merged, 0.5, [])


# -- end to end -------------------------------------------------------------------------------


def test_top_one_is_solve_worst(chain3):
    pl = make_platform(chain3, 2, 3.0)
    rep = estimate_wcett(chain3, platform=pl, accuracy=4, top=1)
    merged, _ = merge_series(chain3)
    D = rep.D + 1e-9
    direct = solve_worst(merged, rep.measurements, D)
    assert rep.ranked[0].predicted == pytest.approx(direct.predicted)
    assert rep.band_halfwidth == pytest.approx(2 * rep.k * rep.D)


def test_zero_noise_all_paths_is_exact(small_layered):
    pl = make_platform(small_layered, 6)
    rep = estimate_wcett(small_layered, platform=pl, accuracy=1, top=4)
    assert rep.D == pytest.approx(0, abs=1e-6) and rep.band_halfwidth == 0
    for r in rep.ranked:
        assert r.predicted == pytest.approx(r.measured, abs=1e-6)
    preds = [r.predicted for r in rep.ranked]
    truth = sorted((pl.baseline(p) for p in enumerate_paths(small_layered)), reverse=True)
    assert preds == pytest.approx(truth[: len(preds)], abs=1e-6)


def test_topk_sorted_distinct_feasible():
    g = layered_dag(4, 3, 0.5, 5, exclusions=2)
    pl = make_platform(g, 5, 4.0)
    rep = estimate_wcett(g, platform=pl, accuracy=2, top=6)
    preds = [r.predicted for r in rep.ranked]
    assert preds == sorted(preds, reverse=True)
    assert len({r.edges for r in rep.ranked}) == len(rep.ranked)
    assert all(g.is_feasible(g.path(r.edges)) for r in rep.ranked)


def test_topk_exhausts_small_graphs(chain3):
    rep = estimate_wcett(chain3, platform=make_platform(chain3, 0), accuracy=2, top=20)
    assert len(rep.ranked) == 8


def test_early_stop_rule(chain3):
    pl = make_platform(chain3, 0)
    full = estimate_wcett(chain3, platform=pl, accuracy=1, top=8)
    early = estimate_wcett(chain3, platform=pl, accuracy=1, top=8, early_stop=True)
    # zero band: anything shorter than the longest stops the list
    best = full.ranked[0].predicted
    assert [r.predicted for r in early.ranked] == [r.predicted for r in full.ranked if r.predicted >= best - 1e-9]


def test_adversarial_hidden_path_stays_consistent():
    n = 3
    g = diamond_chain(n)
    merged, mapping = merge_series(g)
    seed = list(compute_spanner(merged).paths)
    measured = {mapping.expand(p).edge_ids for p in seed}
    hidden = next(p for p in enumerate_paths(g) if p.edge_ids not in measured)
    mu = 0.5
    pl = make_platform(g, 0, weights=np.ones(g.n_edges))
    pl = type(pl)(pl.weights, mu, ADVERSARIAL, 0, {hidden.edge_ids: mu})
    rep = estimate_wcett(g, platform=pl, accuracy=100, top=8)
    row = next(r for r in rep.ranked if r.edges == hidden.edge_ids)
    assert 2 * n - mu - 1e-6 <= row.predicted <= 2 * n + mu + 1e-6


def test_measurement_file_mode(chain3):
    pl = make_platform(chain3, 1, 2.0)
    ms = measure_all(pl, enumerate_paths(chain3))
    rep = estimate_wcett(chain3, measurements=ms, top=2)
    assert rep.k == pytest.approx(1, abs=1e-6)
    assert all(r.measured is not None for r in rep.ranked)
    partial = MeasurementSet(list(ms)[:2])
    rep = estimate_wcett(chain3, measurements=partial, top=1)
    assert math.isinf(rep.k)


def test_estimate_argument_checks(chain3):
    with pytest.raises(ValueError):
        estimate_wcett(chain3)
    with pytest.raises(ValueError):
        estimate_wcett(chain3, platform=make_platform(chain3, 0), top=0)


def test_report_dict_shape(chain3):
    rep = estimate_wcett(chain3, platform=make_platform(chain3, 0, 1.0), accuracy=2, top=2)
    doc = rep.to_dict()
    assert set(doc) == {"k", "D", "band", "paths", "iterations"}
    assert set(doc["paths"][0]) == {"edges", "predicted", "measured"}
    assert all(it["seconds"] is None for it in doc["iterations"])
    assert all(isinstance(it["seconds"], float) for it in rep.to_dict(timing=True)["iterations"])


def test_compare_single_path(single_path):
    pl = make_platform(single_path, 0, 0.5)
    row = compare_baseline(single_path, pl)
    assert row.basis_paths == 1 and row.k == pytest.approx(1)
    assert row.baseline_predicted == pytest.approx(row.refined_predicted)


def test_compare_zero_noise_recovers_longest(chain3):
    pl = make_platform(chain3, 4)
    row = compare_baseline(chain3, pl)
    truth = max(pl.baseline(p) for p in enumerate_paths(chain3))
    assert row.baseline_predicted == pytest.approx(truth)
    assert row.refined_predicted == pytest.approx(truth)
    assert row.baseline_bound == 8 and row.refined_bound == pytest.approx(10)
    assert row.edge_bound == 12
