"""Path mappings between merge trees and the path mapping distance.

A path mapping pairs monotone (root-to-leaf directed) paths of two trees.
Mapped paths must not overlap, and every pair either starts at both roots
or hangs off the end of another pair.  The distance is the cheapest mapping,
where a mapped pair costs the difference of the path lengths and every
unmapped edge costs its own length.

The optimum is found with a dynamic program over pairs of "open" paths
``(a..x, b..y)``.  For fixed endpoints ``(x, y)`` the values for all
ancestor pairs ``(a, b)`` form a small matrix, so each step is a handful of
numpy operations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tree import MergeTree, check_merge_tree, path_length

__all__ = [
    "PathMapping",
    "DistanceResult",
    "validate_path_mapping",
    "path_mapping_cost",
    "path_mapping_distance",
    "brute_force_distance",
    "ORACLE_EDGE_LIMIT",
]

ORACLE_EDGE_LIMIT = 16


@dataclass(frozen=True)
class PathMapping:
    """Pairs of node paths ``(p1, p2)``, each listed from its top node down."""

    pairs: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()

    def __init__(self, pairs=()):
        object.__setattr__(self, "pairs", tuple((tuple(p), tuple(q)) for p, q in pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def swapped(self) -> "PathMapping":
        return PathMapping((q, p) for p, q in self.pairs)

    def mapped_edges(self, side: int) -> set[tuple[int, int]]:
        """Edges ``(child, parent)`` covered on side 0 (first tree) or 1."""
        out = set()
        for pair in self.pairs:
            p = pair[side]
            out.update((b, a) for a, b in zip(p, p[1:]))
        return out

    def mapped_nodes(self, side: int) -> set[int]:
        return {v for pair in self.pairs for v in pair[side]}

    def to_json(self) -> dict:
        return {"pairs": [{"p1": list(p), "p2": list(q)} for p, q in self.pairs]}

    @classmethod
    def from_json(cls, data: dict) -> "PathMapping":
        return cls((d["p1"], d["p2"]) for d in data["pairs"])


@dataclass
class DistanceResult:
    cost: float
    mapping: PathMapping = field(default_factory=PathMapping)

    def __float__(self):
        return float(self.cost)


def _check_path(tree: MergeTree, path, label) -> list[str]:
    out = []
    for v in path:
        if v not in tree.f:
            raise KeyError(f"node not in tree: {v}")
    if len(path) < 2:
        out.append(f"{label}: path {list(path)} has fewer than two nodes")
    if len(set(path)) != len(path):
        out.append(f"{label}: path {list(path)} repeats a node")
    for a, b in zip(path, path[1:]):
        if tree.parent[b] != a:
            out.append(f"{label}: path {list(path)} is not monotone at ({a}, {b})")
            break
    return out


def validate_path_mapping(mapping: PathMapping, t1: MergeTree, t2: MergeTree) -> list[str]:
    """Return every violated path mapping clause; empty means valid."""
    out: list[str] = []
    pairs = list(mapping.pairs)
    for i, (p, q) in enumerate(pairs):
        out += _check_path(t1, p, f"pair {i} (first tree)")
        out += _check_path(t2, q, f"pair {i} (second tree)")
    for (i, (p, q)), (j, (r, s)) in itertools.combinations(enumerate(pairs), 2):
        if (p == r) != (q == s):
            out.append(f"one-to-one: pairs {i} and {j} share a path on only one side")
        if len(set(p) & set(r)) > 1:
            out.append(f"paths do not overlap: first-tree paths of pairs {i} and {j} share more than one node")
        if len(set(q) & set(s)) > 1:
            out.append(f"paths do not overlap: second-tree paths of pairs {i} and {j} share more than one node")
    ends = {(p[-1], q[-1]) for p, q in pairs if p and q}
    for i, (p, q) in enumerate(pairs):
        if not p or not q:
            continue
        at_roots = p[0] == t1.root and q[0] == t2.root
        if not at_roots and (p[0], q[0]) not in ends:
            out.append(f"connected subtree: pair {i} neither starts at the roots nor at the end of another pair")
    return out


def path_mapping_cost(mapping: PathMapping, t1: MergeTree, t2: MergeTree) -> float:
    """Relabel cost of mapped pairs plus the length of every unmapped edge."""
    problems = validate_path_mapping(mapping, t1, t2)
    if problems:
        raise ValueError("invalid path mapping: " + "; ".join(problems))
    cost = sum(abs(path_length(t1, p) - path_length(t2, q)) for p, q in mapping.pairs)
    m1, m2 = mapping.mapped_edges(0), mapping.mapped_edges(1)
    cost += sum(t1.length(c) for c, p in t1.edges() if (c, p) not in m1)
    cost += sum(t2.length(c) for c, p in t2.edges() if (c, p) not in m2)
    return cost


# ---------------------------------------------------------------------------
# exact dynamic program


class _Arrays:
    """Dense per-tree lookups used by the dynamic program."""

    def __init__(self, tree: MergeTree):
        self.tree = tree
        self.f = tree.f
        self.children = tree.children
        self.post = [v for v in tree.postorder() if v != tree.root]
        self.anc = {v: tree.ancestors(v) for v in tree.nodes}
        self.anc_f = {v: np.array([tree.f[a] for a in self.anc[v]]) for v in tree.nodes}
        below: dict[int, float] = {}
        for v in tree.postorder():
            below[v] = sum(tree.length(c) + below[c] for c in tree.children[v])
        # cost of removing the edge above v together with everything under it
        self.drop = {v: (tree.length(v) + below[v]) if tree.parent[v] is not None else below[v]
                     for v in tree.nodes}
        self.total = below[tree.root]


def _partial_assignment(cost: np.ndarray, drop1: np.ndarray, drop2: np.ndarray):
    """Cheapest partial matching where unmatched rows/columns pay their drop cost.

    Returns ``(value, [(i, j), ...])``.
    """
    base = float(drop1.sum() + drop2.sum())
    if cost.size == 0:
        return base, []
    gain = cost - drop1[:, None] - drop2[None, :]
    clipped = np.minimum(gain, 0.0)
    rows, cols = linear_sum_assignment(clipped)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if gain[i, j] < 0.0]
    value = base + sum(float(gain[i, j]) for i, j in pairs)
    return value, pairs


_CLOSE = 0


def path_mapping_distance(t1: MergeTree, t2: MergeTree) -> DistanceResult:
    """Exact path mapping distance with an optimal witness mapping."""
    check_merge_tree(t1)
    check_merge_tree(t2)
    if t1.kind != t2.kind:
        raise ValueError("cannot compare a split tree with a join tree")
    A1, A2 = _Arrays(t1), _Arrays(t2)

    D: dict[tuple[int, int], np.ndarray] = {}
    choice: dict[tuple[int, int], np.ndarray] = {}
    matched: dict[tuple[int, int], list[tuple[int, int]]] = {}

    drops1 = {x: np.array([A1.drop[c] for c in A1.children[x]]) for x in A1.post}
    drops2 = {y: np.array([A2.drop[d] for d in A2.children[y]]) for y in A2.post}
    rel1 = {x: A1.f[x] - A1.anc_f[x] for x in A1.post}
    rel2 = {y: A2.f[y] - A2.anc_f[y] for y in A2.post}
    for x in A1.post:
        cx = A1.children[x]
        drop_cx = drops1[x]
        drop_sum1 = float(drop_cx.sum())
        for y in A2.post:
            cy = A2.children[y]
            drop_cy = drops2[y]
            drop_sum2 = float(drop_cy.sum())
            # close both paths at (x, y) and distribute the children
            if cx and cy:
                C = np.array([[D[c, d][-1, -1] for d in cy] for c in cx])
                avalue, apairs = _partial_assignment(C, drop_cx, drop_cy)
                matched[x, y] = [(cx[i], cy[j]) for i, j in apairs]
            else:
                avalue = drop_sum1 + drop_sum2
                matched[x, y] = []
            best = np.abs(rel1[x][:, None] - rel2[y][None, :]) + avalue
            ch = np.zeros(best.shape, dtype=np.int16)
            # strict improvement keeps the first option on ties
            k = 1
            for i, c in enumerate(cx):
                opt = D[c, y][:-1, :] + (drop_sum1 - drop_cx[i])
                better = opt < best
                best = np.where(better, opt, best)
                ch[better] = k
                k += 1
            for j, d in enumerate(cy):
                opt = D[x, d][:, :-1] + (drop_sum2 - drop_cy[j])
                better = opt < best
                best = np.where(better, opt, best)
                ch[better] = k
                k += 1
            D[x, y] = best
            choice[x, y] = ch

    empty_cost = A1.total + A2.total
    x0, y0 = t1.children[t1.root][0], t2.children[t2.root][0]
    best = float(D[x0, y0][0, 0])
    if best > empty_cost:
        return DistanceResult(empty_cost, PathMapping())

    pairs: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    # explicit stack: (ancestor index in first tree, x, ancestor index in second tree, y)
    todo = [(0, x0, 0, y0)]
    while todo:
        ai, x, bi, y = todo.pop()
        while True:
            k = int(choice[x, y][ai, bi])
            ncx = len(A1.children[x])
            if k == _CLOSE:
                break
            if k <= ncx:
                x = A1.children[x][k - 1]
            else:
                y = A2.children[y][k - 1 - ncx]
        p = tuple(A1.anc[x][ai:]) + (x,)
        q = tuple(A2.anc[y][bi:]) + (y,)
        pairs.append((p, q))
        for c, d in reversed(matched[x, y]):
            todo.append((len(A1.anc[c]) - 1, c, len(A2.anc[d]) - 1, d))
    return DistanceResult(best, PathMapping(pairs))


# ---------------------------------------------------------------------------
# brute-force oracle


def _down_paths(tree: MergeTree, start: int, first: int):
    """All monotone paths from ``start`` whose second node is ``first``."""
    for end in tree.subtree(first):
        chain = [end]
        while chain[-1] != start:
            chain.append(tree.parent[chain[-1]])
        yield tuple(reversed(chain))


def _partial_injections(a, b):
    """Every partial one-to-one matching between sequences ``a`` and ``b``."""
    if not a:
        yield []
        return
    head, rest = a[0], a[1:]
    yield from _partial_injections(rest, b)
    for j, w in enumerate(b):
        for tail in _partial_injections(rest, b[:j] + b[j + 1:]):
            yield [(head, w)] + tail


def _bundles(t1: MergeTree, t2: MergeTree, u: int, w: int):
    """Every set of pairs hanging below the matched endpoints ``(u, w)``."""
    for inj in _partial_injections(list(t1.children[u]), list(t2.children[w])):
        per_child = []
        for c, d in inj:
            opts = []
            for p in _down_paths(t1, u, c):
                for q in _down_paths(t2, w, d):
                    for sub in _bundles(t1, t2, p[-1], q[-1]):
                        opts.append([(p, q)] + sub)
            per_child.append(opts)
        for combo in itertools.product(*per_child):
            yield [pair for part in combo for pair in part]


def enumerate_path_mappings(t1: MergeTree, t2: MergeTree):
    """Yield every valid path mapping between two trees (exponential)."""
    yield PathMapping()
    r1, r2 = t1.root, t2.root
    for p in _down_paths(t1, r1, t1.children[r1][0]):
        for q in _down_paths(t2, r2, t2.children[r2][0]):
            for sub in _bundles(t1, t2, p[-1], q[-1]):
                yield PathMapping([(p, q)] + sub)


def _fast_cost(mapping: PathMapping, t1: MergeTree, t2: MergeTree, tot1: float, tot2: float) -> float:
    cost = tot1 + tot2
    for p, q in mapping.pairs:
        l1 = abs(t1.f[p[-1]] - t1.f[p[0]])
        l2 = abs(t2.f[q[-1]] - t2.f[q[0]])
        cost += abs(l1 - l2) - l1 - l2
    return cost


def brute_force_distance(t1: MergeTree, t2: MergeTree) -> DistanceResult:
    """Exhaustive minimum over all path mappings; independent check of the DP."""
    check_merge_tree(t1)
    check_merge_tree(t2)
    if len(t1.edges()) + len(t2.edges()) > ORACLE_EDGE_LIMIT:
        raise ValueError(f"oracle limit: at most {ORACLE_EDGE_LIMIT} edges in total")
    tot1, tot2 = t1.total_length(), t2.total_length()
    best, best_m = None, None
    for m in enumerate_path_mappings(t1, t2):
        # pairs cover disjoint edge sets, so unmapped length = total - mapped path lengths
        c = _fast_cost(m, t1, t2, tot1, tot2)
        if best is None or c < best:
            best, best_m = c, m
    return DistanceResult(path_mapping_cost(best_m, t1, t2), best_m)
