import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtbary.synth import random_merge_tree
from mtbary.tree import (
    MergeTree,
    branch_decomposition_elder,
    canonical_form,
    check_merge_tree,
    contract_regular_nodes,
    edge_labels,
    edge_length,
    is_isomorphic,
    path_length,
    relabel_from_edge_lengths,
    set_root_value,
    validate_merge_tree,
)

from conftest import chain

seeds = st.integers(0, 2**32 - 1)


def clauses(tree):
    return {v.clause for v in validate_merge_tree(tree)}


def test_single_edge_is_valid():
    assert validate_merge_tree(chain([0.0, 1.0], [None, 0])) == []


def test_root_with_two_children():
    t = chain([0.0, 1.0, 2.0], [None, 0, 0])
    assert clauses(t) == {"root-degree"}
    assert validate_merge_tree(t)[0].node == 0


def test_inner_node_with_one_child():
    t = chain([0.0, 1.0, 2.0], [None, 0, 1])
    report = validate_merge_tree(t)
    assert [(v.clause, v.node) for v in report] == [("inner-degree", 1)]


def test_non_monotone_edge():
    t = chain([0.0, 3.0, 2.0, 4.0], [None, 0, 1, 1])
    assert clauses(t) == {"monotonicity"}


def test_join_tree_reverses_monotonicity():
    t = chain([0.0, -3.0, -5.0, -4.0], [None, 0, 1, 1], kind="join")
    assert validate_merge_tree(t) == []
    assert clauses(chain([0.0, 3.0, 5.0, 4.0], [None, 0, 1, 1], kind="join")) == {"monotonicity"}


def test_cycle_and_missing_parent_reported():
    t = MergeTree({0: 0, 1: 1, 2: 2}, {0: None, 1: 2, 2: 1})
    assert "cycle" in clauses(t)
    t = MergeTree({0: 0, 1: 1}, {0: None, 1: 7})
    assert "parent-missing" in clauses(t)


def test_two_roots():
    t = MergeTree({0: 0, 1: 1, 2: 0, 3: 1}, {0: None, 1: 0, 2: None, 3: 2})
    assert "single-root" in clauses(t)


def test_check_raises_with_all_clauses():
    with pytest.raises(ValueError, match="root-degree"):
        check_merge_tree(chain([0.0, 1.0, 2.0], [None, 0, 0]))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_mutations_are_reported(seed):
    rng = np.random.default_rng(seed)
    t = random_merge_tree(rng, int(rng.integers(3, 10)))
    assert validate_merge_tree(t) == []
    # push a leaf below its parent
    leaf = t.leaves()[0]
    f = dict(t.f)
    f[leaf] = f[t.parent[leaf]] - 1.0
    assert "monotonicity" in clauses(MergeTree.from_internal(f, t.parent, root=t.root))
    # give the root a second child
    parent = dict(t.parent)
    f = dict(t.f)
    parent[999], f[999] = t.root, t.f[t.root] + 1.0
    assert "root-degree" in clauses(MergeTree.from_internal(f, parent, root=t.root))
    # hang a new single child under a leaf
    parent = dict(t.parent)
    f = dict(t.f)
    parent[999], f[999] = leaf, t.f[leaf] + 1.0
    assert "inner-degree" in clauses(MergeTree.from_internal(f, parent, root=t.root))


def test_edge_and_path_lengths(fig3):
    t1, _, t3 = fig3
    assert edge_length(t1, (3, 1)) == 6.0
    assert path_length(t3, (0, 1, 2, 3)) == 9.0
    assert path_length(t3, (2,)) == 0.0
    with pytest.raises(KeyError, match="node not in tree"):
        edge_length(t1, (42, 1))


def test_join_tree_lengths_are_positive():
    t = chain([5.0, 2.0, -1.0, 0.0], [None, 0, 1, 1], kind="join")
    assert edge_labels(t) == {1: 3.0, 2: 3.0, 3: 2.0}
    assert t.scalar(2) == -1.0


def test_elder_decomposition_fig3(fig3):
    bdt = branch_decomposition_elder(fig3[2])
    main, *rest = bdt.branches
    assert main.nodes == (0, 1, 2, 3) and main.persistence == 9.0
    assert sorted((b.nodes, b.persistence, b.parent) for b in rest) == [
        ((1, 5), 4.0, 0), ((2, 4), 2.0, 0)]


def test_single_edge_decomposition():
    bdt = branch_decomposition_elder(chain([0.0, 1.0], [None, 0]))
    assert len(bdt) == 1 and bdt.main.nodes == (0, 1)


def test_elder_ties_choose_smallest_leaf():
    t = chain([0.0, 1.0, 3.0, 3.0], [None, 0, 1, 1])
    bdt = branch_decomposition_elder(t)
    assert bdt.main.leaf == 2
    t = MergeTree({0: 0.0, 1: 1.0, 7: 3.0, 4: 3.0}, {0: None, 1: 0, 7: 1, 4: 1})
    assert branch_decomposition_elder(t).main.leaf == 4


@settings(max_examples=80, deadline=None)
@given(seeds, st.booleans())
def test_branches_partition_edges(seed, integer):
    rng = np.random.default_rng(seed)
    t = random_merge_tree(rng, int(rng.integers(1, 15)), integer=integer)
    bdt = branch_decomposition_elder(t)
    sets = bdt.edge_sets()
    union = set().union(*sets)
    assert sum(len(s) for s in sets) == len(union) == len(t.edges())
    assert union == set(t.edges())
    assert np.isclose(sum(b.persistence for b in bdt.branches), t.total_length())
    assert bdt.main.persistence == pytest.approx(t.scalar_range())
    for b in bdt.branches[1:]:
        parent = bdt.by_id(b.parent)
        assert b.nodes[0] in parent.nodes


def test_relabel_from_edge_lengths():
    t = relabel_from_edge_lengths({0: None, 1: 0}, {1: 5.0})
    assert t.f == {0: 0.0, 1: 5.0}
    t = relabel_from_edge_lengths({0: None, 1: 0, 2: 1, 3: 1}, {1: 2.0, 2: 3.0, 3: 1.0})
    assert t.f[1] == 2.0 and t.f[2] == 5.0
    with pytest.raises(ValueError):
        relabel_from_edge_lengths({0: None, 1: 0}, {1: 0.0})


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_edge_labels_roundtrip(seed):
    rng = np.random.default_rng(seed)
    t = random_merge_tree(rng, int(rng.integers(1, 12)))
    t = set_root_value(t, 1.5)
    back = relabel_from_edge_lengths(t.parent, edge_labels(t), root_value=1.5)
    assert back.parent == t.parent
    assert all(abs(back.f[v] - t.f[v]) < 1e-9 for v in t.nodes)
    assert sorted(edge_labels(back).values()) == pytest.approx(sorted(edge_labels(t).values()))


def test_contract_and_isomorphism():
    t = chain([0.0, 1.0, 2.0, 3.0, 4.0], [None, 0, 1, 2, 2])
    c = contract_regular_nodes(t)
    assert validate_merge_tree(c) == []
    assert len(c) == 4
    other = MergeTree({10: 0.0, 11: 2.0, 12: 4.0, 13: 3.0}, {10: None, 11: 10, 12: 11, 13: 11})
    assert is_isomorphic(c, other)
    assert canonical_form(c) == canonical_form(other)
    assert not is_isomorphic(c, other.scaled(2.0))


def test_compact_keeps_shape(fig3):
    t = fig3[2]
    c = t.compact()
    assert c.nodes == tuple(range(len(t)))
    assert is_isomorphic(t, c, 0.0)
