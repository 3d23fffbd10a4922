"""Merge trees of 2D regular-grid scalar fields, and persistence simplification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import MergeTree, branch_decomposition_elder, check_merge_tree, cleanup_tree

__all__ = ["ScalarGrid", "split_tree", "join_tree", "simplify", "strict_local_maxima"]


@dataclass(frozen=True)
class ScalarGrid:
    """Scalar samples on a ``width x height`` grid, stored row-major."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("empty grid")
        if vals.size != self.width * self.height:
            raise ValueError(f"expected {self.width * self.height} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")

    @classmethod
    def from_array(cls, arr) -> "ScalarGrid":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.size == 0:
            raise ValueError("empty grid")
        return cls(arr.shape[1], arr.shape[0], arr.ravel())

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.height, self.width)

    def negated(self) -> "ScalarGrid":
        return ScalarGrid(self.width, self.height, -self.values)


def _neighbors(i: int, w: int, h: int):
    x, y = i % w, i // w
    if x > 0:
        yield i - 1
    if x < w - 1:
        yield i + 1
    if y > 0:
        yield i - w
    if y < h - 1:
        yield i + w


def strict_local_maxima(grid: ScalarGrid) -> list[int]:
    """Vertices above all 4-neighbours in the (value, index) order."""
    w, h, vals = grid.width, grid.height, grid.values
    out = []
    for i in range(w * h):
        key = (vals[i], i)
        if all((vals[j], j) < key for j in _neighbors(i, w, h)):
            out.append(i)
    return out


def split_tree(grid: ScalarGrid) -> MergeTree:
    """Split tree (superlevel-set merge tree) under 4-connectivity.

    Equal values are ordered by vertex index.  Regular vertices are
    contracted; the root sits at the global minimum and has one child.
    Maxima on plateaus that merge at their own value carry no persistence
    and are dropped, so leaves are the strict maxima of positive height.
    """
    w, h = grid.width, grid.height
    vals = grid.values
    n = w * h
    # descending (value, index)
    order = np.lexsort((np.arange(n), vals))[::-1]

    uf = np.full(n, -1, dtype=np.int64)

    def find(a):
        r = a
        while uf[r] != r:
            r = uf[r]
        while uf[a] != r:
            uf[a], a = r, uf[a]
        return r

    lowest: dict[int, int] = {}  # component representative -> lowest tree node
    scalars: dict[int, float] = {}
    parents: dict[int, int | None] = {}

    def new_node(value):
        nid = len(scalars)
        scalars[nid] = float(value)
        parents[nid] = None
        return nid

    last_node = None
    for i in order:
        i = int(i)
        uf[i] = i
        comps = sorted({find(j) for j in _neighbors(i, w, h) if uf[j] != -1})
        if not comps:
            lowest[i] = new_node(vals[i])
        elif len(comps) == 1:
            r = comps[0]
            uf[i] = r
        else:
            node = new_node(vals[i])
            for r in comps:
                parents[lowest.pop(r)] = node
                uf[r] = i
            lowest[i] = node
        last_node = i
    (rep,) = set(lowest)
    top = lowest[rep]
    fmin = float(vals[last_node])
    if scalars[top] > fmin:
        root = new_node(fmin)
    else:
        # the global minimum itself merges components (only possible on 1-wide strips)
        span = float(vals.max() - vals.min()) or 1.0
        root = new_node(fmin - 1e-9 * span)
    parents[top] = root
    # plateaus give zero-persistence leaves and zero-length saddle chains
    return cleanup_tree(scalars, parents, root, "split", 0.0)


def join_tree(grid: ScalarGrid) -> MergeTree:
    """Join tree, computed as the split tree of the negated field."""
    t = split_tree(grid.negated())
    return MergeTree.from_internal(t.f, t.parent, kind="join", root=t.root)


def _remove_leaf_edge(f: dict, parent: dict, children: dict, leaf: int, root: int):
    p = parent.pop(leaf)
    del f[leaf]
    children[p].remove(leaf)
    del children[leaf]
    if p != root and len(children[p]) == 1:
        (c,) = children[p]
        gp = parent.pop(p)
        parent[c] = gp
        children[gp].remove(p)
        children[gp].append(c)
        del children[p]
        del f[p]


def simplify(tree: MergeTree, threshold_fraction: float) -> MergeTree:
    """Cancel elder-rule side branches below ``threshold_fraction`` of the scalar range.

    The least persistent branch is removed first and the decomposition is
    recomputed after every removal.  The main branch is never removed.
    """
    check_merge_tree(tree)
    if not 0.0 <= threshold_fraction <= 1.0:
        raise ValueError("threshold_fraction must lie in [0, 1]")
    cutoff = threshold_fraction * tree.scalar_range()
    f = dict(tree.f)
    parent = dict(tree.parent)
    children = {v: list(c) for v, c in tree.children.items()}
    current = tree
    while True:
        bdt = branch_decomposition_elder(current)
        # a minimum-persistence branch always exists among those without child branches
        cands = [b for b in bdt.branches[1:] if not bdt.children[b.id]]
        if not cands:
            break
        b = min(cands, key=lambda br: (br.persistence, br.leaf))
        if not b.persistence < cutoff:
            break
        _remove_leaf_edge(f, parent, children, b.leaf, tree.root)
        current = MergeTree.from_internal(f, parent, kind=tree.kind, root=tree.root)
    return current
