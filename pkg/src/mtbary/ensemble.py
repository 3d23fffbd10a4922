"""Ensemble analysis: distance matrices, k-means, ARI and temporal reduction."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .interpolation import geodesic, pm_barycenter, sample
from .pathmapping import path_mapping_distance
from .tree import MergeTree, branch_decomposition_elder, check_merge_tree
from .wasserstein import (
    bdt_to_tree,
    tree_to_bdt,
    wasserstein_barycenter,
    wasserstein_distance,
    wasserstein_interpolate,
)

__all__ = [
    "METRICS",
    "tree_distance",
    "distance_matrix",
    "count_blocks",
    "adjusted_rand_index",
    "same_partition",
    "ClusterResult",
    "kmeans",
    "ReductionResult",
    "temporal_reduce",
    "temporal_reconstruct",
    "side_branch_hosts",
]

METRICS = ("path", "wasserstein")


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def tree_distance(t1: MergeTree, t2: MergeTree, metric: str = "path") -> float:
    """Path mapping distance, or W2 between the normalized elder-rule BDTs."""
    _check_metric(metric)
    if metric == "path":
        return path_mapping_distance(t1, t2).cost
    return wasserstein_distance(tree_to_bdt(t1), tree_to_bdt(t2))[0]


def _pair_distance(a, b, metric: str) -> float:
    if metric == "path":
        return path_mapping_distance(a, b).cost
    return wasserstein_distance(a, b)[0]


def distance_matrix(trees: Sequence[MergeTree], metric: str = "path", threads: int = 1) -> np.ndarray:
    """Symmetric matrix of pairwise distances with a zero diagonal."""
    _check_metric(metric)
    items = list(trees) if metric == "path" else [tree_to_bdt(t) for t in trees]
    n = len(items)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda ij: _pair_distance(items[ij[0]], items[ij[1]], metric), pairs))
    else:
        vals = [_pair_distance(items[i], items[j], metric) for i, j in pairs]
    D = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        D[i, j] = D[j, i] = v
    return D


def count_blocks(D: np.ndarray, fraction: float = 0.25) -> int:
    """Connected components of the graph linking entries below ``fraction * max(D)``."""
    D = np.asarray(D, dtype=float)
    cut = fraction * D.max() if D.size else 0.0
    n, _ = connected_components(D < cut, directed=False)
    return int(n)


def adjusted_rand_index(labels_a: Sequence, labels_b: Sequence) -> float:
    """Adjusted Rand index computed from the contingency table."""
    a, b = list(labels_a), list(labels_b)
    if len(a) != len(b):
        raise ValueError(f"label sequences differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        return 1.0
    _, ai = np.unique(np.asarray(a, dtype=object).astype(str), return_inverse=True)
    _, bi = np.unique(np.asarray(b, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        x = np.asarray(x, dtype=float)
        return float((x * (x - 1) / 2).sum())

    index = comb2(table)
    sa, sb = comb2(table.sum(axis=1)), comb2(table.sum(axis=0))
    total = n * (n - 1) / 2
    expected = sa * sb / total
    max_index = (sa + sb) / 2
    if max_index == expected:
        # both partitions trivial in the same way
        return 1.0
    return (index - expected) / (max_index - expected)


def same_partition(labels_a: Sequence, labels_b: Sequence) -> bool:
    """True when both labelings group the members identically."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences differ in length")
    fwd, back = {}, {}
    for x, y in zip(labels_a, labels_b):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


# ---------------------------------------------------------------------------
# k-means


@dataclass
class ClusterResult:
    """Best k-means run plus a record of every run.

    ``runs`` holds one dict per run with keys ``seed``, ``assignments``,
    ``energy``, ``rounds`` and, when ground truth was supplied, ``ari`` and
    ``correct``.
    """

    assignments: list[int]
    centroids: list
    runs: list[dict]
    energy: float
    ari: float | None = None
    best_run: int = 0

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignments))


class _Space:
    """Distance and barycenter operations for one metric."""

    def __init__(self, trees, metric: str, variant: str):
        self.metric = metric
        self.variant = variant
        self.items = list(trees) if metric == "path" else [tree_to_bdt(t) for t in trees]
        self.power = 1 if metric == "path" else 2
        self._index = {id(x): i for i, x in enumerate(self.items)}
        self._memo: dict[tuple[int, int], float] = {}

    def _member(self, x) -> int | None:
        i = self._index.get(id(x))
        return i if i is not None and self.items[i] is x else None

    def dist(self, a, b) -> float:
        i, j = self._member(a), self._member(b)
        if i is None or j is None:
            return _pair_distance(a, b, self.metric)
        key = (min(i, j), max(i, j))
        if key not in self._memo:
            self._memo[key] = 0.0 if i == j else _pair_distance(a, b, self.metric)
        return self._memo[key]

    def center(self, members, previous):
        if len(members) == 1:
            return members[0]
        if self.metric == "path":
            return pm_barycenter(members, variant=self.variant, init_tree=previous).tree
        return wasserstein_barycenter(members, init=previous)[0]


def _kmeans_run(space: _Space, k: int, rng: np.random.Generator, max_rounds: int):
    items = space.items
    n = len(items)
    init = rng.choice(n, size=k, replace=False)
    centroids = [items[i] for i in init]
    assign = None
    trace = []
    rounds = 0
    while True:
        D = np.array([[space.dist(x, c) for c in centroids] for x in items])
        new = [int(np.argmin(row)) for row in D]
        # empty clusters take the member farthest from its centroid
        for c in range(k):
            if c in new:
                continue
            counts = np.bincount(new, minlength=k)
            movable = [i for i in range(n) if counts[new[i]] > 1]
            far = max(movable, key=lambda i: (D[i, new[i]], -i))
            new[far] = c
            centroids[c] = items[far]
            D[far, c] = 0.0
        trace.append(float(sum(D[i, new[i]] ** space.power for i in range(n))))
        if new == assign:
            break
        assign = new
        if rounds >= max_rounds:
            break
        rounds += 1
        centroids = [space.center([items[i] for i in range(n) if assign[i] == c], centroids[c])
                     for c in range(k)]
    return assign, centroids, trace[-1], rounds, trace


def kmeans(trees: Sequence[MergeTree], k: int, metric: str = "path", runs: int = 1, seed: int = 42,
           truth: Sequence | None = None, variant: str = "mean", max_rounds: int = 50,
           threads: int = 1) -> ClusterResult:
    """k-means over merge trees with centroids computed as barycenters.

    Every run starts from ``k`` distinct random members and alternates
    assignment and re-centering until the assignment stops changing or
    ``max_rounds`` re-centerings have happened.  The run with the lowest
    energy (sum of distances for the path metric, of squared distances for
    the Wasserstein metric) is reported.  Centroids of the Wasserstein
    variant are normalized branch decomposition trees.
    """
    _check_metric(metric)
    trees = list(trees)
    n = len(trees)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if runs < 1:
        raise ValueError("runs must be positive")
    if truth is not None and len(truth) != n:
        raise ValueError("ground-truth labels do not match the member count")
    for t in trees:
        check_merge_tree(t)
    space = _Space(trees, metric, variant)
    run_seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(runs)]

    def one(run_seed):
        return _kmeans_run(space, k, np.random.default_rng(run_seed), max_rounds)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(one, run_seeds))
    else:
        outs = [one(s) for s in run_seeds]
    records = []
    for s, (assign, _, energy, rounds, trace) in zip(run_seeds, outs):
        rec = {"seed": s, "assignments": assign, "energy": energy, "rounds": rounds, "trace": trace}
        if truth is not None:
            rec["ari"] = adjusted_rand_index(assign, truth)
            rec["correct"] = same_partition(assign, truth)
        records.append(rec)
    best = min(range(runs), key=lambda r: (records[r]["energy"], r))
    assign, centroids, energy, _, _ = outs[best]
    ari = adjusted_rand_index(assign, truth) if truth is not None else None
    return ClusterResult(assign, centroids, records, energy, ari, best)


# ---------------------------------------------------------------------------
# temporal reduction


@dataclass
class ReductionResult:
    """Keyframes, per-frame reconstructions and their errors under both metrics."""

    keyframes: list[int]
    reconstructions: list[MergeTree]
    errors: list[dict] = field(default_factory=list)

    def max_error(self, metric: str = "path") -> float:
        return max(row[metric] for row in self.errors)


def _interpolate(t0: MergeTree, t1: MergeTree, alpha: float, metric: str, cache: dict, key) -> MergeTree:
    if alpha == 0.0:
        return t0
    if alpha == 1.0:
        return t1
    if metric == "path":
        if key not in cache:
            cache[key] = geodesic(t0, t1)
        return sample(cache[key], alpha)
    if key not in cache:
        b0, b1 = tree_to_bdt(t0), tree_to_bdt(t1)
        cache[key] = (b0, b1, wasserstein_distance(b0, b1)[1])
    b0, b1, matching = cache[key]
    return bdt_to_tree(wasserstein_interpolate(b0, b1, alpha, matching))


def temporal_reduce(trees: Sequence[MergeTree], keep: int, metric: str = "path") -> list[int]:
    """Greedy keyframe selection for a tree time series.

    Repeatedly drops the interior keyframe that is best reconstructed by
    interpolating between its current neighbours, breaking ties by the
    smaller index, until ``keep`` keyframes remain.  Interpolation follows
    the path mapping geodesic for the path metric and the BDT interpolation
    for the Wasserstein metric.
    """
    _check_metric(metric)
    trees = list(trees)
    n = len(trees)
    if keep < 2:
        raise ValueError("at least two keyframes are required")
    if keep > n:
        raise ValueError(f"cannot keep {keep} of {n} frames")
    keys = list(range(n))
    cache: dict = {}
    errors: dict[tuple[int, int, int], float] = {}

    def err(l, j, r):
        if (l, j, r) not in errors:
            rec = _interpolate(trees[l], trees[r], (j - l) / (r - l), metric, cache, (l, r))
            errors[(l, j, r)] = tree_distance(trees[j], rec, metric)
        return errors[(l, j, r)]

    while len(keys) > keep:
        pos = min(range(1, len(keys) - 1), key=lambda p: (err(keys[p - 1], keys[p], keys[p + 1]), keys[p]))
        del keys[pos]
    return keys


def temporal_reconstruct(trees: Sequence[MergeTree], keyframes: Sequence[int],
                         metric: str = "path") -> ReductionResult:
    """Rebuild every frame by interpolating between the enclosing keyframes.

    Errors are reported under both metrics; keyframe rows are 0.
    """
    _check_metric(metric)
    trees = list(trees)
    keys = list(keyframes)
    if keys != sorted(set(keys)) or not keys or keys[0] != 0 or keys[-1] != len(trees) - 1:
        raise ValueError("keyframes must be sorted, unique and include the first and last frame")
    cache: dict = {}
    recon, rows = [], []
    for l, r in zip(keys, keys[1:] + [None]):
        stop = r if r is not None else l + 1
        for t in range(l, stop):
            rec = trees[t] if t == l else _interpolate(trees[l], trees[r], (t - l) / (r - l), metric, cache, (l, r))
            recon.append(rec)
            rows.append({"index": t, "keyframe": t in keys,
                         "path": tree_distance(trees[t], rec, "path"),
                         "wasserstein": tree_distance(trees[t], rec, "wasserstein")})
    return ReductionResult(keys, recon, rows)


# ---------------------------------------------------------------------------
# structure of summarized trees


def side_branch_hosts(tree: MergeTree, main_fraction: float = 0.5) -> tuple[list[int], dict[int, int]]:
    """Split leaves into main and side maxima and find the host of each side leaf.

    A leaf is a main maximum when its elder-rule branch persists for at
    least ``main_fraction`` of the scalar range.  A side leaf belongs to the
    main leaf it shares the highest common ancestor with.
    """
    bdt = branch_decomposition_elder(tree)
    cut = main_fraction * tree.scalar_range()
    mains = [b.leaf for b in bdt.branches if b.persistence >= cut]
    sides = [b.leaf for b in bdt.branches if b.persistence < cut]
    chains = {v: [v] + list(reversed(tree.ancestors(v))) for v in mains + sides}
    hosts = {}
    for s in sides:
        best = None
        for m in mains:
            on_m = set(chains[m])
            lca = next(a for a in chains[s] if a in on_m)
            key = (tree.f[lca], -m)
            if best is None or key > best[0]:
                best = (key, m)
        hosts[s] = best[1]
    return mains, hosts
