"""Scikit-learn style wrappers around extraction, barycenters, clustering and reduction.

Inputs are sequences of trees or grids rather than numeric matrices, so the
estimators validate with :func:`check_trees` / :func:`check_grids` instead of
``check_array``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .ensemble import kmeans, temporal_reconstruct, temporal_reduce, tree_distance
from .fields import ScalarGrid, join_tree, simplify, split_tree
from .interpolation import pm_barycenter
from .tree import MergeTree, check_merge_tree
from .wasserstein import bdt_to_tree, tree_to_bdt, wasserstein_barycenter, wasserstein_distance

__all__ = [
    "check_trees",
    "check_grids",
    "MergeTreeExtractor",
    "MergeTreeBarycenter",
    "MergeTreeKMeans",
    "TemporalReducer",
]


def check_trees(X, min_trees: int = 1) -> list[MergeTree]:
    """Validate a sequence of merge trees of one kind.

    Parameters
    ----------
    X : sequence of MergeTree
    min_trees : int
        Smallest accepted number of trees.

    Returns
    -------
    list of MergeTree

    Raises
    ------
    TypeError
        If ``X`` is a single tree or holds something other than trees.
    ValueError
        If a tree is invalid, kinds are mixed or there are too few trees.
    """
    if isinstance(X, MergeTree):
        raise TypeError("expected a sequence of trees, got a single MergeTree")
    trees = list(X)
    for i, t in enumerate(trees):
        if not isinstance(t, MergeTree):
            raise TypeError(f"item {i} is {type(t).__name__}, not MergeTree")
        check_merge_tree(t)
    if len(trees) < min_trees:
        raise ValueError(f"need at least {min_trees} trees, got {len(trees)}")
    if len({t.kind for t in trees}) > 1:
        raise ValueError("cannot mix split and join trees")
    return trees


def check_grids(X) -> list[ScalarGrid]:
    """Validate a sequence of grids; 2D arrays are wrapped as :class:`ScalarGrid`."""
    if isinstance(X, ScalarGrid) or (isinstance(X, np.ndarray) and X.ndim == 2):
        raise TypeError("expected a sequence of grids, got a single grid")
    out = []
    for i, g in enumerate(X):
        if isinstance(g, ScalarGrid):
            out.append(g)
            continue
        arr = np.asarray(g, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"item {i}: expected a 2D array, got {arr.ndim} dimensions")
        out.append(ScalarGrid.from_array(arr))
    if not out:
        raise ValueError("no grids given")
    return out


def _check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class MergeTreeExtractor(TransformerMixin, BaseEstimator):
    """Grid fields to (optionally simplified) merge trees.

    Parameters
    ----------
    kind : {"split", "join"}
    threshold : float
        Persistence simplification threshold as a fraction of each tree's
        scalar range; 0 keeps every branch.
    """

    def __init__(self, kind: str = "split", threshold: float = 0.0):
        self.kind = kind
        self.threshold = threshold

    def fit(self, X, y=None):
        check_grids(X)
        if self.kind not in ("split", "join"):
            raise ValueError(f"kind must be 'split' or 'join', got {self.kind!r}")
        self.n_grids_in_ = len(X)
        return self

    def transform(self, X) -> list[MergeTree]:
        grids = check_grids(X)
        build = split_tree if self.kind == "split" else join_tree
        out = [build(g) for g in grids]
        if self.threshold:
            out = [simplify(t, self.threshold) for t in out]
        return out


class MergeTreeBarycenter(TransformerMixin, BaseEstimator):
    """Fréchet mean of an ensemble of merge trees.

    Parameters
    ----------
    metric : {"path", "wasserstein"}
    variant : {"mean", "median"}
        Only the path metric has a median variant.
    init : int
        Index of the member used as the initial candidate.
    max_iter : int
    tol : float
        Relative energy change that ends the iteration.

    Attributes
    ----------
    barycenter_ : MergeTree
    bdt_ : BranchDecompositionTree
        Normalized barycenter BDT (Wasserstein metric only).
    energy_trace_ : list of float
    n_iter_ : int
    """

    def __init__(self, metric: str = "path", variant: str = "mean", init: int = 0,
                 max_iter: int = 100, tol: float = 0.01):
        self.metric = metric
        self.variant = variant
        self.init = init
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        trees = check_trees(X)
        if not 0 <= self.init < len(trees):
            raise ValueError(f"init={self.init} is out of range for {len(trees)} trees")
        if self.metric == "path":
            res = pm_barycenter(trees, variant=self.variant, init_index=self.init,
                                max_iter=self.max_iter, rel_tol=self.tol)
            self.barycenter_ = res.tree
            self.energy_trace_ = res.energy_trace
            self.n_iter_ = res.iterations
        elif self.metric == "wasserstein":
            if self.variant != "mean":
                raise ValueError("the Wasserstein barycenter has no median variant")
            bary, trace = wasserstein_barycenter([tree_to_bdt(t) for t in trees], init_index=self.init,
                                                 max_iter=self.max_iter, rel_tol=self.tol)
            self.bdt_ = bary
            self.barycenter_ = bdt_to_tree(bary)
            self.energy_trace_ = trace
            self.n_iter_ = len(trace) - 1
        else:
            raise ValueError(f"unknown metric {self.metric!r}")
        return self

    def transform(self, X) -> np.ndarray:
        """Distance of every tree to the barycenter, shape ``(n, 1)``."""
        _check_fitted(self, "barycenter_")
        trees = check_trees(X)
        if self.metric == "wasserstein":
            return np.array([[wasserstein_distance(self.bdt_, tree_to_bdt(t))[0]] for t in trees])
        return np.array([[tree_distance(self.barycenter_, t, "path")] for t in trees])


class MergeTreeKMeans(ClusterMixin, BaseEstimator):
    """k-means over merge trees with barycenter centroids.

    Parameters
    ----------
    n_clusters : int
    metric : {"path", "wasserstein"}
    n_init : int
        Number of random restarts; the lowest-energy run wins.
    variant : {"mean", "median"}
    max_rounds : int
    random_state : int

    Attributes
    ----------
    labels_ : ndarray of int
    cluster_centers_ : list
        Merge trees for the path metric, normalized BDTs for Wasserstein.
    inertia_ : float
    result_ : ClusterResult
    """

    def __init__(self, n_clusters: int = 3, metric: str = "path", n_init: int = 5, variant: str = "mean",
                 max_rounds: int = 50, random_state: int = 42):
        self.n_clusters = n_clusters
        self.metric = metric
        self.n_init = n_init
        self.variant = variant
        self.max_rounds = max_rounds
        self.random_state = random_state

    def fit(self, X, y=None):
        trees = check_trees(X, min_trees=self.n_clusters)
        res = kmeans(trees, self.n_clusters, metric=self.metric, runs=self.n_init, seed=self.random_state,
                     truth=y, variant=self.variant, max_rounds=self.max_rounds)
        self.result_ = res
        self.labels_ = np.asarray(res.assignments)
        self.cluster_centers_ = res.centroids
        self.inertia_ = res.energy
        return self

    def predict(self, X) -> np.ndarray:
        _check_fitted(self, "cluster_centers_")
        trees = check_trees(X)
        out = []
        for t in trees:
            if self.metric == "path":
                d = [tree_distance(t, c, "path") for c in self.cluster_centers_]
            else:
                b = tree_to_bdt(t)
                d = [wasserstein_distance(b, c)[0] for c in self.cluster_centers_]
            out.append(int(np.argmin(d)))
        return np.asarray(out)


class TemporalReducer(TransformerMixin, BaseEstimator):
    """Keyframe selection for a tree time series, with geodesic reconstruction.

    Parameters
    ----------
    n_keyframes : int
    metric : {"path", "wasserstein"}

    Attributes
    ----------
    keyframes_ : list of int
    result_ : ReductionResult
    """

    def __init__(self, n_keyframes: int = 2, metric: str = "path"):
        self.n_keyframes = n_keyframes
        self.metric = metric

    def fit(self, X, y=None):
        trees = check_trees(X, min_trees=2)
        self.keyframes_ = temporal_reduce(trees, self.n_keyframes, metric=self.metric)
        self.n_frames_ = len(trees)
        return self

    def transform(self, X) -> list[MergeTree]:
        """Reconstruction of every frame from the fitted keyframes."""
        _check_fitted(self, "keyframes_")
        trees = check_trees(X)
        if len(trees) != self.n_frames_:
            raise ValueError(f"fitted on {self.n_frames_} frames, got {len(trees)}")
        self.result_ = temporal_reconstruct(trees, self.keyframes_, metric=self.metric)
        return self.result_.reconstructions
