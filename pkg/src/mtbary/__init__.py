"""Merge trees of scalar fields: distances, geodesics, barycenters and ensemble analysis."""

from .ensemble import (
    ClusterResult,
    ReductionResult,
    adjusted_rand_index,
    count_blocks,
    distance_matrix,
    kmeans,
    side_branch_hosts,
    temporal_reconstruct,
    temporal_reduce,
    tree_distance,
)
from .estimators import MergeTreeBarycenter, MergeTreeExtractor, MergeTreeKMeans, TemporalReducer
from .fields import ScalarGrid, join_tree, simplify, split_tree
from .interpolation import BarycenterResult, Geodesic, frechet_energy, geodesic, pm_barycenter, sample
from .pathmapping import PathMapping, brute_force_distance, path_mapping_cost, path_mapping_distance
from .tree import (
    Branch,
    BranchDecompositionTree,
    MergeTree,
    branch_decomposition_elder,
    check_merge_tree,
    is_isomorphic,
    validate_merge_tree,
)
from .wasserstein import (
    bdt_to_tree,
    tree_to_bdt,
    tree_wasserstein_distance,
    wasserstein_barycenter,
    wasserstein_distance,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterResult",
    "ReductionResult",
    "adjusted_rand_index",
    "count_blocks",
    "distance_matrix",
    "kmeans",
    "side_branch_hosts",
    "temporal_reconstruct",
    "temporal_reduce",
    "tree_distance",
    "MergeTreeBarycenter",
    "MergeTreeExtractor",
    "MergeTreeKMeans",
    "TemporalReducer",
    "ScalarGrid",
    "join_tree",
    "simplify",
    "split_tree",
    "BarycenterResult",
    "Geodesic",
    "frechet_energy",
    "geodesic",
    "pm_barycenter",
    "sample",
    "PathMapping",
    "brute_force_distance",
    "path_mapping_cost",
    "path_mapping_distance",
    "Branch",
    "BranchDecompositionTree",
    "MergeTree",
    "branch_decomposition_elder",
    "check_merge_tree",
    "is_isomorphic",
    "validate_merge_tree",
    "bdt_to_tree",
    "tree_to_bdt",
    "tree_wasserstein_distance",
    "wasserstein_barycenter",
    "wasserstein_distance",
]
