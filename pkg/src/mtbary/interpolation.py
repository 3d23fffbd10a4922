"""Geodesics and barycenters of merge trees under the path mapping distance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pathmapping import PathMapping, path_mapping_distance, validate_path_mapping
from .tree import MergeTree, check_merge_tree, cleanup_tree

__all__ = [
    "Geodesic",
    "geodesic",
    "sample",
    "remove_unmatched",
    "relabel_barycenter",
    "add_unmatched",
    "BarycenterResult",
    "pm_barycenter",
    "frechet_energy",
    "cleanup_tree",
]

POS_TOL = 1e-9


def _tol(*trees: MergeTree) -> float:
    scale = max(1.0, *(abs(x) for t in trees for x in t.f.values()))
    return POS_TOL * scale


# ---------------------------------------------------------------------------
# geodesics


@dataclass
class Geodesic:
    """Supertree induced by an optimal path mapping, with interpolation rules.

    ``rule[g]`` describes how node ``g`` of the interpolated tree gets its
    value: ``("matched", f0, f1)``, ``("interior", start, end, offset)``,
    ``("deleted", parent, delta0)`` or ``("inserted", parent, delta1)``.
    """

    t0: MergeTree
    t1: MergeTree
    mapping: PathMapping
    parent: dict[int, int | None]
    rule: dict[int, tuple]
    order: list[int]
    cost: float = float("nan")

    def __call__(self, alpha: float) -> MergeTree:
        return sample(self, alpha)


def geodesic(t0: MergeTree, t1: MergeTree, mapping: PathMapping | None = None) -> Geodesic:
    """Build the geodesic between two trees along an optimal path mapping."""
    check_merge_tree(t0)
    check_merge_tree(t1)
    cost = float("nan")
    if mapping is None:
        res = path_mapping_distance(t0, t1)
        mapping, cost = res.mapping, res.cost
    if not mapping.pairs:
        raise ValueError("geodesic needs a mapping that matches the roots")
    parent: dict[int, int | None] = {}
    rule: dict[int, tuple] = {}
    g0: dict[int, int] = {}
    g1: dict[int, int] = {}

    def new(p, r):
        g = len(rule)
        parent[g] = p
        rule[g] = r
        return g

    root = new(None, ("matched", t0.f[t0.root], t1.f[t1.root]))
    g0[t0.root], g1[t1.root] = root, root

    # pairs are processed top-down so every start node already exists
    pending = list(mapping.pairs)
    while pending:
        rest = []
        for p, q in pending:
            if p[0] not in g0:
                rest.append((p, q))
                continue
            s = g0[p[0]]
            l0 = t0.f[p[-1]] - t0.f[p[0]]
            l1 = t1.f[q[-1]] - t1.f[q[0]]
            marks = [((t0.f[v] - t0.f[p[0]]) / l0, 0, v) for v in p[1:-1]]
            marks += [((t1.f[u] - t1.f[q[0]]) / l1, 1, u) for u in q[1:-1]]
            marks.sort()
            end_rule = ("matched", t0.f[p[-1]], t1.f[q[-1]])
            # end node first in id order would break preorder; allocate chain then end
            chain: list[tuple[float, list]] = []
            for r, side, v in marks:
                if chain and abs(chain[-1][0] - r) <= POS_TOL:
                    chain[-1][1].append((side, v))
                else:
                    chain.append((r, [(side, v)]))
            prev = s
            interior_ids = []
            for r, members in chain:
                g = new(prev, ("interior", s, None, r))
                interior_ids.append(g)
                for side, v in members:
                    (g0 if side == 0 else g1)[v] = g
                prev = g
            e = new(prev, end_rule)
            for g in interior_ids:
                rule[g] = ("interior", s, e, rule[g][3])
            g0[p[-1]], g1[q[-1]] = e, e
        if len(rest) == len(pending):
            raise ValueError("mapping pairs are not connected to the roots")
        pending = rest

    for tree, gmap, tag in ((t0, g0, "deleted"), (t1, g1, "inserted")):
        for v in tree.preorder():
            if v in gmap:
                continue
            pv = tree.parent[v]
            gmap[v] = new(gmap[pv], (tag, gmap[pv], tree.f[v] - tree.f[pv]))

    order = _topological(parent)
    return Geodesic(t0, t1, mapping, parent, rule, order, cost)


def _topological(parent: dict[int, int | None]) -> list[int]:
    children: dict[int, list[int]] = {g: [] for g in parent}
    root = None
    for g, p in parent.items():
        if p is None:
            root = g
        else:
            children[p].append(g)
    out, stack = [], [root]
    while stack:
        g = stack.pop()
        out.append(g)
        stack.extend(sorted(children[g], reverse=True))
    return out


def _geodesic_values(geo: Geodesic, alpha: float) -> dict[int, float]:
    f: dict[int, float] = {}
    pending_interior = []
    for g in geo.order:
        r = geo.rule[g]
        if r[0] == "matched":
            f[g] = (1 - alpha) * r[1] + alpha * r[2]
        elif r[0] == "interior":
            pending_interior.append(g)
        elif r[0] == "deleted":
            f[g] = _value(geo, f, r[1], alpha) + (1 - alpha) * r[2]
        else:
            f[g] = _value(geo, f, r[1], alpha) + alpha * r[2]
    for g in pending_interior:
        _value(geo, f, g, alpha)
    return f


def _value(geo: Geodesic, f: dict, g: int, alpha: float) -> float:
    if g not in f:
        _, s, e, r = geo.rule[g]
        fs = _value(geo, f, s, alpha)
        fe = (1 - alpha) * geo.rule[e][1] + alpha * geo.rule[e][2]
        f[g] = fs + r * (fe - fs)
    return f[g]


def sample(geo: Geodesic, alpha: float) -> MergeTree:
    """Interpolated tree at ``alpha`` (0 gives the first tree, 1 the second)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    f = _geodesic_values(geo, alpha)
    tol = _tol(geo.t0, geo.t1)
    tree = cleanup_tree(f, geo.parent, geo.order[0], geo.t0.kind, tol)
    return tree.compact()


# ---------------------------------------------------------------------------
# barycenter update


def _check_mappings(B: MergeTree, mappings, trees):
    if len(mappings) != len(trees):
        raise ValueError("need one mapping per member tree")
    for m, t in zip(mappings, trees):
        for p, _ in m.pairs:
            for v in p:
                if v not in B.f:
                    raise ValueError(f"mapping references node {v} which is not in the barycenter")
        problems = validate_path_mapping(m, B, t)
        if problems:
            raise ValueError("invalid path mapping: " + "; ".join(problems))


def _remove_raw(B: MergeTree, mappings) -> tuple[dict, dict]:
    mapped = set()
    for m in mappings:
        mapped |= m.mapped_edges(0)
    f, parent = {}, {}
    for v in B.preorder():
        p = B.parent[v]
        if p is None or ((v, p) in mapped and p in f):
            f[v], parent[v] = B.f[v], p
    return f, parent


def remove_unmatched(B: MergeTree, mappings: Sequence[PathMapping], trees: Sequence[MergeTree]) -> MergeTree:
    """Drop candidate edges that no mapping covers, then splice out one-child nodes."""
    _check_mappings(B, mappings, trees)
    f, parent = _remove_raw(B, mappings)
    return cleanup_tree(f, parent, B.root, B.kind, 0.0)


def _aggregate(values: np.ndarray, variant: str) -> float:
    if variant == "mean":
        return float(values.mean())
    if variant == "median":
        s = np.sort(values)
        return float(s[(len(s) - 1) // 2])
    raise ValueError(f"unknown barycenter variant {variant!r}")


def _relabel_raw(B: MergeTree, f: dict, parent: dict, mappings, trees, variant: str) -> dict:
    k = len(trees)
    contrib = {v: np.zeros(k) for v, p in parent.items() if p is not None}
    for i, (m, t) in enumerate(zip(mappings, trees)):
        for p, q in m.pairs:
            lp = B.f[p[-1]] - B.f[p[0]]
            if not lp > 0:
                raise ValueError("degenerate path: mapped candidate path has zero length")
            lq = t.f[q[-1]] - t.f[q[0]]
            for a, b in zip(p, p[1:]):
                if b in contrib:
                    contrib[b][i] += (B.f[b] - B.f[a]) / lp * lq
    root_value = _aggregate(np.array([t.f[t.root] for t in trees]), variant)
    new = {B.root: root_value}
    for v in _preorder(parent, B.root):
        if parent[v] is not None:
            new[v] = new[parent[v]] + _aggregate(contrib[v], variant)
    return new


def _preorder(parent: dict, root: int) -> list[int]:
    children: dict[int, list[int]] = {v: [] for v in parent}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)
    out, stack = [], [root]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(sorted(children[u], reverse=True))
    return out


def relabel_barycenter(B: MergeTree, mappings: Sequence[PathMapping], trees: Sequence[MergeTree],
                       variant: str = "mean") -> MergeTree:
    """Set each candidate edge to the mean (or median) of its proportional segments.

    Edges unmapped in a member contribute zero for that member.  The root
    goes to the mean (median) of the member root values.
    """
    _check_mappings(B, mappings, trees)
    new = _relabel_raw(B, B.f, B.parent, mappings, trees, variant)
    tree = MergeTree.from_internal(new, B.parent, kind=B.kind, root=B.root)
    if variant == "median":
        return cleanup_tree(tree.f, tree.parent, tree.root, tree.kind, _tol(tree))
    return check_merge_tree(tree)


def _add_raw(B: MergeTree, f: dict, parent: dict, mappings, trees, tol: float):
    """Insert member path nodes and unmatched member subtrees into (f, parent)."""
    k = len(trees)
    f, parent = dict(f), dict(parent)
    # nodes inserted on each original candidate edge (keyed by child id), sorted by value
    on_edge: dict[int, list[int]] = {}
    next_id = max(max(f), max(B.f)) + 1

    def locate(path, value):
        for a, b in zip(path, path[1:]):
            if abs(f[a] - value) <= tol:
                return a
            if abs(f[b] - value) <= tol:
                return b
            if f[a] < value < f[b]:
                nodes = on_edge.setdefault(b, [])
                for n in nodes:
                    if abs(f[n] - value) <= tol:
                        return n
                return ("new", b)
        raise ValueError("position outside the mapped path")

    subtrees = []
    for m, t in zip(mappings, trees):
        mapped_t = m.mapped_edges(1)
        for p, q in m.pairs:
            fs, fe = f[p[0]], f[p[-1]]
            lq = t.f[q[-1]] - t.f[q[0]]
            for u in q[1:]:
                if u == q[-1]:
                    target = p[-1]
                else:
                    value = fs + (t.f[u] - t.f[q[0]]) / lq * (fe - fs)
                    hit = locate(p, value)
                    if isinstance(hit, tuple):
                        target = next_id
                        next_id += 1
                        f[target] = value
                        on_edge[hit[1]].append(target)
                        on_edge[hit[1]].sort(key=lambda n: f[n])
                    else:
                        target = hit
                for c in t.children[u]:
                    if (c, u) not in mapped_t:
                        subtrees.append((t, c, target))
    # splice inserted path nodes into their edges
    for b, nodes in on_edge.items():
        prev = parent[b]
        for n in nodes:
            parent[n] = prev
            prev = n
        parent[b] = prev
    for t, c, target in subtrees:
        ids = {t.parent[c]: target}
        for v in t.subtree(c):
            ids[v] = next_id
            next_id += 1
            pv = ids[t.parent[v]]
            parent[ids[v]] = pv
            f[ids[v]] = f[pv] + (t.f[v] - t.f[t.parent[v]]) / k
    return f, parent


def add_unmatched(B: MergeTree, mappings: Sequence[PathMapping], trees: Sequence[MergeTree]) -> MergeTree:
    """Insert member nodes on mapped paths and member subtrees missing from the candidate.

    Inserted nodes keep their relative position along the path; inserted
    subtree edges are scaled by ``1/k``.
    """
    _check_mappings(B, mappings, trees)
    f, parent = _add_raw(B, B.f, B.parent, mappings, trees, _tol(B, *trees))
    tree = cleanup_tree(f, parent, B.root, B.kind, _tol(B, *trees))
    return check_merge_tree(tree)


def _update(B: MergeTree, mappings, trees, variant: str) -> MergeTree:
    f, parent = _remove_raw(B, mappings)
    f = _relabel_raw(B, f, parent, mappings, trees, variant)
    tol = _tol(B, *trees)
    if variant == "mean":
        # positions along mapped paths are taken in the relabelled geometry
        relabelled = MergeTree.from_internal(f, parent, kind=B.kind, root=B.root)
        f, parent = _add_raw(relabelled, f, parent, mappings, trees, tol)
    return cleanup_tree(f, parent, B.root, B.kind, tol).compact()


# ---------------------------------------------------------------------------
# barycenter iteration


@dataclass
class BarycenterResult:
    tree: MergeTree
    energy_trace: list[float]
    mappings: list[PathMapping]
    iterations: int
    size_trace: list[int] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.energy_trace[-1]


def _assign(B: MergeTree, trees):
    results = [path_mapping_distance(B, t) for t in trees]
    return [r.mapping for r in results], float(sum(r.cost for r in results))


def pm_barycenter(trees: Sequence[MergeTree], variant: str = "mean", init_index: int | None = 0,
                  seed: int | None = None, max_iter: int = 100, rel_tol: float = 0.01,
                  init_tree: MergeTree | None = None) -> BarycenterResult:
    """Path mapping barycenter by alternating optimal mappings and updates.

    The iteration stops once the relative change of the Fréchet energy
    (sum of distances) drops below ``rel_tol`` or after ``max_iter``
    updates.  Energy is not guaranteed to decrease monotonically.
    """
    trees = list(trees)
    if not trees:
        raise ValueError("barycenter of an empty set")
    if variant not in ("mean", "median"):
        raise ValueError(f"unknown barycenter variant {variant!r}")
    for t in trees:
        check_merge_tree(t)
    if init_tree is not None:
        B = check_merge_tree(init_tree)
    else:
        if init_index is None:
            init_index = int(np.random.default_rng(seed).integers(len(trees)))
        B = trees[init_index]
    mappings, energy = _assign(B, trees)
    trace, sizes = [energy], [len(B)]
    iterations = 0
    for _ in range(max_iter):
        B = _update(B, mappings, trees, variant)
        iterations += 1
        mappings, energy = _assign(B, trees)
        trace.append(energy)
        sizes.append(len(B))
        prev = trace[-2]
        if prev <= 0 or abs(prev - energy) / prev < rel_tol:
            break
    return BarycenterResult(B, trace, mappings, iterations, sizes)


def frechet_energy(B, trees: Sequence, metric: str = "path") -> float:
    """Sum of path mapping distances, or of squared Wasserstein distances."""
    if metric == "path":
        return float(sum(path_mapping_distance(B, t).cost for t in trees))
    if metric == "wasserstein":
        from .wasserstein import tree_to_bdt, wasserstein_distance

        bb = B if not isinstance(B, MergeTree) else tree_to_bdt(B)
        return float(sum(wasserstein_distance(bb, t if not isinstance(t, MergeTree) else tree_to_bdt(t))[0] ** 2
                         for t in trees))
    raise ValueError(f"unknown metric {metric!r}")
