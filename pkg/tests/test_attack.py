import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from scnet.attack import (
    AttackStrategy,
    ExperimentConfig,
    make_attack_order,
    nearest_rank,
    realization_seeds,
    removal_grid,
    run_ensemble,
    run_removal,
    summarize,
)
from scnet.errors import DataError
from scnet.graph import FirmAttrs, build_graph, compute_metrics, reachability_baseline
from scnet.multiscale import Scale, ScaleMapping, aggregate
from scnet.synth import SupplyGenParams, gen_supply_chain

from . import oracles
from .conftest import msf


def test_value_order():
    plan = make_attack_order("abc", AttackStrategy.PAGERANK, {"a": 0.5, "b": 0.3, "c": 0.2}, seed=1)
    assert plan.order == ["a", "b", "c"]


def test_ties_shuffled_by_seed():
    vals = {"a": 10, "b": 10, "c": 5}
    orders = {tuple(make_attack_order("abc", AttackStrategy.EMPLOYEES, vals, seed=s).order) for s in range(50)}
    assert orders == {("a", "b", "c"), ("b", "a", "c")}
    same = [make_attack_order("abc", AttackStrategy.EMPLOYEES, vals, seed=7).order for _ in range(3)]
    assert same[0] == same[1] == same[2]


def test_missing_value_is_an_error():
    with pytest.raises(DataError):
        make_attack_order("ab", AttackStrategy.EMPLOYEES, {"a": 1}, seed=0)
    with pytest.raises(DataError):
        make_attack_order("ab", AttackStrategy.PAGERANK, None, seed=0)


def test_random_first_unit_is_uniform():
    n = 5
    firsts = [make_attack_order(range(n), AttackStrategy.RANDOM, seed=s).positions[0] for s in range(10_000)]
    counts = np.bincount(firsts, minlength=n)
    assert stats.chisquare(counts).pvalue > 0.001


def test_scale_invariance_of_value_orders():
    vals = np.array([0.1, 0.4, 0.2, 0.3])
    a = make_attack_order(range(4), AttackStrategy.PAGERANK, vals, seed=2).positions
    b = make_attack_order(range(4), AttackStrategy.PAGERANK, vals * 1e6, seed=2).positions
    assert np.array_equal(a, b)


def test_t1_single_removal(t1):
    base = reachability_baseline(t1)
    mapping = aggregate(t1, Scale.FIRM)
    order = ["A", "M1", "M2", "B", "C", "D", "E"]
    plan = make_attack_order(t1.ids, AttackStrategy.PAGERANK, {u: -order.index(u) for u in t1.ids})
    curve = run_removal(t1, mapping, base, plan)
    i = int(np.flatnonzero(np.isclose(curve.grid, 6 / 7))[0])
    assert (curve.atsr[i], curve.stsr[i]) == (0.5, 0.5)
    assert (curve.atsr[0], curve.stsr[0], curve.altsr[0], curve.scfr[0]) == (1, 1, 1, 0)
    assert (curve.atsr[-1], curve.stsr[-1], curve.altsr[-1]) == (0, 0, 0)
    assert np.array_equal(curve.scfr, 1.0 - curve.atsr)


def test_sweep_agrees_with_compute_metrics():
    g, _ = gen_supply_chain(SupplyGenParams(msf_count=4, tier_count=4, seed=5, loop_injection_prob=0.2))
    base = reachability_baseline(g)
    mapping = aggregate(g, Scale.FIRM)
    plan = make_attack_order(g.ids, AttackStrategy.RANDOM, seed=3)
    curve = run_removal(g, mapping, base, plan)
    order = plan.order
    for i, k in enumerate(curve.removed):
        m = compute_metrics(g, order[:k], base)
        assert (curve.atsr[i], curve.stsr[i], curve.altsr[i]) == tuple(m)


def test_unit_machinery_matches_firm_scale(t1):
    base = reachability_baseline(t1)
    firm = aggregate(t1, Scale.FIRM)
    plan = make_attack_order(t1.ids, AttackStrategy.RANDOM, seed=4)
    # the same firms as their own units, but labelled and numbered differently
    perm = np.array([3, 0, 6, 1, 5, 2, 4])
    units = tuple(f"u{p}" for p in range(7))
    unit_of = perm
    mapping = ScaleMapping(Scale.INDUSTRY, unit_of, units)
    plan2 = make_attack_order(units, AttackStrategy.RANDOM, seed=0)
    plan2 = type(plan2)(Scale.INDUSTRY, plan2.strategy, units, perm[plan.positions], 0)
    a = run_removal(t1, firm, base, plan)
    b = run_removal(t1, mapping, base, plan2)
    assert np.array_equal(a.stack(), b.stack())


def test_unit_removal_takes_all_members(t1):
    nodes = [msf("M1", industry="X"), msf("M2", industry="Y")]
    nodes += [FirmAttrs(f, industry=i) for f, i in zip("ABCDE", "XYZZZ")]
    g = build_graph([(c, s) for c, s in t1.edge_list()], nodes)
    mapping = aggregate(g, Scale.INDUSTRY)
    plan = make_attack_order(mapping.units, AttackStrategy.PAGERANK, {"Z": 3, "X": 2, "Y": 1})
    curve = run_removal(g, mapping, reachability_baseline(g), plan)
    assert np.allclose(curve.grid, [1, 2 / 3, 1 / 3, 0])
    assert curve.atsr.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert np.allclose(curve.firms_remaining, [1, 4 / 7, 2 / 7, 0])


def test_removal_grid():
    assert removal_grid(7).tolist() == list(range(8))
    g = removal_grid(1000, 200)
    assert g[0] == 0 and g[-1] == 1000 and len(g) == 201


def test_nearest_rank():
    s = np.arange(1, 101, dtype=float)[:, None]
    assert nearest_rank(s, 2.5)[0] == 3 and nearest_rank(s, 97.5)[0] == 98
    assert nearest_rank(np.array([[5.0]]), 2.5)[0] == 5


def test_summarize_band_contains_mean():
    s = np.array([[0.0]] * 99 + [[1.0]])
    mean, lo, hi = summarize(s)
    assert lo[0] <= mean[0] <= hi[0]


def test_realization_seeds_deterministic():
    assert realization_seeds(3, 7) == realization_seeds(3, 7)
    assert realization_seeds(3, 7) != realization_seeds(3, 8)


def test_single_realization_collapses(t1):
    res = run_ensemble(t1, ExperimentConfig(realizations=1))
    for m in res.mean:
        assert np.array_equal(res.mean[m], res.p2_5[m]) and np.array_equal(res.mean[m], res.p97_5[m])


def test_pagerank_without_missing_data_has_zero_variance(t1):
    res = run_ensemble(t1, ExperimentConfig(strategy=AttackStrategy.PAGERANK, realizations=5))
    assert res.realization_count == 5
    for m in res.mean:
        assert np.array_equal(res.p2_5[m], res.p97_5[m])


def test_default_realization_counts():
    assert ExperimentConfig().n_realizations == 100
    assert ExperimentConfig(strategy=AttackStrategy.PAGERANK_TRANSPOSE).n_realizations == 24
    with pytest.raises(ValueError):
        ExperimentConfig(realizations=0)


def _exhaustive_prefix_means(n, edges, msfs):
    """Mean ATSR over all k-subsets, which is the mean over all length-k permutation prefixes."""
    out = []
    for k in range(n + 1):
        vals = [oracles.metrics(n, edges, msfs, set(sub))[0] for sub in itertools.combinations(range(n), k)]
        out.append(float(sum(vals, Fraction(0)) / len(vals)))
    return np.array(out)


def test_random_ensemble_matches_exhaustive_average(t1):
    res = run_ensemble(t1, ExperimentConfig(realizations=100, master_seed=1))
    edges = [tuple(e) for e in t1.edges.tolist()]
    want = _exhaustive_prefix_means(7, edges, list(t1.msf_nodes))
    se = res.curves[:, 0, :].std(axis=0, ddof=1) / np.sqrt(100)
    assert np.all(np.abs(res.mean["atsr"] - want) <= 3 * se + 1e-12)


def test_workers_do_not_change_results():
    g, _ = gen_supply_chain(SupplyGenParams(msf_count=5, tier_count=5, seed=2))
    cfg = ExperimentConfig(scale=Scale.INDUSTRY, strategy=AttackStrategy.EMPLOYEES, realizations=6, master_seed=3)
    a = run_ensemble(g, cfg, workers=1)
    b = run_ensemble(g, cfg, workers=4)
    assert np.array_equal(a.curves, b.curves) and a.seeds == b.seeds


def test_varying_unit_counts_use_fraction_grid():
    g, _ = gen_supply_chain(SupplyGenParams(msf_count=5, tier_count=5, seed=2, missing_industry_rate=0.6))
    res = run_ensemble(g, ExperimentConfig(scale=Scale.INDUSTRY, realizations=8, grid_points=50))
    if len(set(res.unit_counts)) > 1:
        assert np.allclose(res.grid, np.linspace(1, 0, 51))
    assert res.mean["atsr"][0] == 1.0 and res.mean["atsr"][-1] == 0.0


def test_tier_truncation_changes_baseline(t2):
    res = run_ensemble(t2, ExperimentConfig(tier_count=2, realizations=3))
    assert res.tier_count == 2 and res.unit_counts == (3, 3, 3)
