"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary;
run with ``pytest tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from mtbary.ensemble import kmeans, side_branch_hosts, temporal_reconstruct, temporal_reduce
from mtbary.fields import simplify, split_tree
from mtbary.interpolation import geodesic, pm_barycenter, sample
from mtbary.pathmapping import brute_force_distance, path_mapping_distance
from mtbary.synth import AnalyticConfig, gen_analytical, gen_geodesic_series, gen_swap_clusters, random_merge_tree
from mtbary.tree import path_length, validate_merge_tree
from mtbary.wasserstein import (
    bdt_to_tree,
    denormalize,
    satisfies_nesting,
    tree_to_bdt,
    wasserstein_barycenter,
)

from conftest import random_pair

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def analytic_trees():
    return [simplify(split_tree(g), 0.02) for g in gen_analytical(AnalyticConfig(seed=42))]


def random_trees(rng, n, max_edges):
    return [random_merge_tree(rng, int(rng.integers(1, max_edges + 1)), integer=bool(rng.integers(2)))
            for _ in range(n)]


def test_c01_oracle_equivalence(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        a, b = random_pair(rng, 6)
        worst = max(worst, abs(path_mapping_distance(a, b).cost - brute_force_distance(a, b).cost))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 120
    report(1, ok, f"1000 pairs, max |dp - brute force| = {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_c02_metric_axioms(report):
    rng = np.random.default_rng(2)
    asym = slack = 0.0
    self_ok = True
    for _ in range(500):
        a, b, c = random_trees(rng, 3, 8)
        ab, ba = path_mapping_distance(a, b).cost, path_mapping_distance(b, a).cost
        ac, cb = path_mapping_distance(a, c).cost, path_mapping_distance(c, b).cost
        asym = max(asym, abs(ab - ba))
        slack = max(slack, ab - ac - cb)
        self_ok &= path_mapping_distance(a, a).cost == 0.0
    ok = asym <= 1e-9 and slack <= 1e-9 and self_ok
    report(2, ok, f"500 triples, max asymmetry {asym:.1e}, max triangle excess {max(slack, 0):.1e}, "
                  f"self-distance exactly 0: {self_ok}")
    assert ok


def test_c03_geodesic_linearity(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        a, b = random_pair(rng, 8)
        g = geodesic(a, b)
        for _ in range(5):
            s, t = sorted(rng.uniform(0, 1, 2))
            d = path_mapping_distance(sample(g, s), sample(g, t)).cost
            expected = (t - s) * g.cost
            if expected > 0:
                worst = max(worst, abs(d - expected) / expected)
            else:
                worst = max(worst, d)
    ok = worst <= 1e-7
    report(3, ok, f"100 pairs x 5 samples, max relative deviation {worst:.1e}")
    assert ok


def test_c04_worked_barycenter(report, fig3):
    res = pm_barycenter(list(fig3), init_index=0, max_iter=1)
    B = res.tree
    root = B.root
    (b,) = B.children[root]
    saddles = [v for v in B.children[b] if B.children[v]]
    leaves_b = sorted((v for v in B.children[b] if not B.children[v]), key=B.scalar)
    (c,) = saddles
    d = max(B.children[c], key=B.scalar)
    e = min(B.children[c], key=B.scalar)
    f = leaves_b[0]
    got = {"AB": path_length(B, (root, b)), "BCD": path_length(B, (b, c, d)), "BF": path_length(B, (b, f)),
           "CE": path_length(B, (c, e)), "C position": path_length(B, (b, c)) / path_length(B, (b, c, d))}
    want = {"AB": 4.0, "BCD": 6.0, "BF": 4.0, "CE": 2.0 / 3.0, "C position": 0.5}
    ok = all(abs(got[k] - want[k]) <= 1e-9 for k in want)
    report(4, ok, ", ".join(f"{k}={got[k]:.9g}" for k in want))
    assert ok


def test_c05_analytic_summaries(report, analytic_trees):
    start = time.perf_counter()
    path_bary = pm_barycenter(analytic_trees, variant="mean").tree
    w_bary, _ = wasserstein_barycenter([tree_to_bdt(t) for t in analytic_trees])
    elapsed = time.perf_counter() - start
    mains_p, hosts_p = side_branch_hosts(simplify(path_bary, 0.02))
    mains_w, hosts_w = side_branch_hosts(simplify(bdt_to_tree(w_bary), 0.02))
    n_hosts_p, n_hosts_w = len(set(hosts_p.values())), len(set(hosts_w.values()))
    ok = len(mains_p) == 4 and n_hosts_p == 1 and n_hosts_w >= 2 and elapsed < 300
    report(5, ok, f"path: {len(mains_p)} main maxima, {len(hosts_p)} side leaves on {n_hosts_p} host(s); "
                  f"wasserstein: {len(mains_w)} main maxima, side leaves on {n_hosts_w} hosts; {elapsed:.0f} s")
    assert ok


def _leaf_counts(trees, variant, init_index, max_iter=100, rel_tol=0.01):
    """Leaf count of every candidate, stepping the barycenter one update at a time."""
    res = pm_barycenter(trees, variant=variant, init_index=init_index, max_iter=1, rel_tol=rel_tol)
    counts = [len(trees[init_index].leaves()), len(res.tree.leaves())]
    trace = res.energy_trace
    while len(trace) - 1 < max_iter:
        prev = trace[-2]
        if prev <= 0 or abs(prev - trace[-1]) / prev < rel_tol:
            break
        res = pm_barycenter(trees, variant=variant, init_tree=res.tree, max_iter=1, rel_tol=rel_tol)
        trace = trace + [res.energy_trace[-1]]
        counts.append(len(res.tree.leaves()))
    return counts


def test_c06_median_never_adds(report):
    # rich members keep the side peaks, sparse members keep only the four hills
    grids = gen_analytical(AnalyticConfig(members=8, seed=7))
    trees = [simplify(split_tree(g), 0.02 if i % 2 else 0.3) for i, g in enumerate(grids)]
    init = 0
    median = _leaf_counts(trees, "median", init)
    mean = _leaf_counts(trees, "mean", init)
    ok = max(median) <= median[0] and max(mean) > mean[0]
    report(6, ok, f"initial candidate {median[0]} leaves; median leaf counts {median}; mean leaf counts {mean}")
    assert ok


def test_c07_clustering(report):
    grids, labels = gen_swap_clusters(3, 4, seed=42)
    trees = [simplify(split_tree(g), 0.02) for g in grids]
    seeds = range(20)
    stats = {}
    for metric in ("path", "wasserstein"):
        aris, correct = [], 0
        for s in seeds:
            res = kmeans(trees, 3, metric=metric, runs=5, seed=s, truth=labels)
            aris.append(res.ari)
            correct += res.runs[res.best_run]["correct"]
        stats[metric] = (float(np.mean(aris)), correct / len(seeds))
    (ari_p, frac_p), (ari_w, frac_w) = stats["path"], stats["wasserstein"]
    ok = ari_p > ari_w and frac_p >= 0.5
    report(7, ok, f"20 seeds: mean ARI path {ari_p:.3f} vs wasserstein {ari_w:.3f}; "
                  f"fully correct path {frac_p:.0%}, wasserstein {frac_w:.0%}")
    assert ok


def test_c08_temporal_reduction(report):
    rng = np.random.default_rng(8)
    # keyframe rows on an arbitrary series
    series = random_trees(rng, 7, 6)
    key_zero = True
    for metric in ("path", "wasserstein"):
        keys = temporal_reduce(series, 3, metric)
        res = temporal_reconstruct(series, keys, metric)
        key_zero &= all(r["path"] == 0.0 and r["wasserstein"] == 0.0 for r in res.errors if r["keyframe"])
    a, b = random_merge_tree(rng, 7), random_merge_tree(rng, 9)
    geo_series = gen_geodesic_series(a, b, 10)
    keys = temporal_reduce(geo_series, 2, "path")
    worst = temporal_reconstruct(geo_series, keys, "path").max_error("path")
    ok = key_zero and keys == [0, 9] and worst < 1e-6
    report(8, ok, f"keyframe errors exactly 0 under both metrics: {key_zero}; "
                  f"10-frame geodesic series keeps {keys}, max error {worst:.1e}")
    assert ok


def test_c09_convergence(report, analytic_trees):
    res = pm_barycenter(analytic_trees, variant="mean")
    trace = res.energy_trace
    rel = abs(trace[-2] - trace[-1]) / trace[-2]
    ok = rel < 0.01 and res.iterations <= 100 and trace[-1] < trace[0]
    report(9, ok, f"{res.iterations} iterations, final relative change {rel:.2%}, "
                  f"energy {trace[0]:.4f} -> {trace[-1]:.4f}")
    assert ok


def test_c10_wasserstein_validity(report, analytic_trees):
    rng = np.random.default_rng(10)
    ensembles = [analytic_trees] + [random_trees(rng, int(rng.integers(2, 7)), 10) for _ in range(100)]
    bad = 0
    for trees in ensembles:
        bary, _ = wasserstein_barycenter([tree_to_bdt(t) for t in trees], init_index=int(rng.integers(len(trees))))
        if not (satisfies_nesting(denormalize(bary)) and validate_merge_tree(bdt_to_tree(bary)) == []):
            bad += 1
    ok = bad == 0
    report(10, ok, f"{len(ensembles)} barycenters, {bad} invalid")
    assert ok


def test_c11_performance(report):
    rng = np.random.default_rng(11)

    def timed(nodes, reps=3):
        best = np.inf
        for _ in range(reps):
            a, b = random_merge_tree(rng, nodes - 1), random_merge_tree(rng, nodes - 1)
            start = time.perf_counter()
            path_mapping_distance(a, b)
            best = min(best, time.perf_counter() - start)
        return best

    t50, t100 = timed(50), timed(100)
    ratio = t100 / t50
    ok = t100 < 10 and ratio <= 24
    report(11, ok, f"100-node pair {t100:.2f} s, 50-node pair {t50:.3f} s, doubling ratio {ratio:.1f}")
    assert ok
