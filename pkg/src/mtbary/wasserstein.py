"""Wasserstein distance, geodesics and barycenters on branch decomposition trees.

Branches live in the birth/death plane.  Two BDTs are compared through
root-preserving partial isomorphisms: every branch is either matched to a
branch of the other tree (together with a consistent matching of its
children) or sent to its diagonal projection along with its whole subtree.

Barycenters and geodesics operate on locally normalized BDTs, where each
non-main branch is expressed relative to the range of its parent branch, so
that any interpolated result denormalizes into a valid merge tree.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tree import Branch, BranchDecompositionTree, MergeTree, branch_decomposition_elder

__all__ = [
    "BirthDeathPoint",
    "diagonal_projection",
    "ground_distance",
    "wasserstein_distance",
    "normalize",
    "denormalize",
    "satisfies_nesting",
    "bdt_to_tree",
    "tree_to_bdt",
    "wasserstein_interpolate",
    "wasserstein_barycenter",
    "tree_wasserstein_distance",
]

DIAG_TOL = 1e-12


class BirthDeathPoint(NamedTuple):
    birth: float
    death: float


def diagonal_projection(b) -> BirthDeathPoint:
    """Closest point of ``b`` on the diagonal."""
    x, y = b
    m = (x + y) / 2.0
    return BirthDeathPoint(m, m)


def _on_diagonal(b) -> bool:
    return abs(b[1] - b[0]) <= DIAG_TOL


def ground_distance(b1, b2) -> float:
    """Euclidean distance in the birth/death plane, zero between diagonal points."""
    if _on_diagonal(b1) and _on_diagonal(b2):
        return 0.0
    return math.hypot(b1[0] - b2[0], b1[1] - b2[1])


def _destroy(b) -> float:
    return ground_distance(b, diagonal_projection(b)) ** 2


def _subtree_destroy(bdt: BranchDecompositionTree) -> dict[int, float]:
    idx = bdt.index()
    out: dict[int, float] = {}
    for bid in reversed(bdt.preorder()):
        out[bid] = _destroy(idx[bid].point) + sum(out[c] for c in bdt.children[bid])
    return out


def _assign(cost: np.ndarray, drop1: np.ndarray, drop2: np.ndarray):
    base = float(drop1.sum() + drop2.sum())
    if cost.size == 0:
        return base, []
    gain = cost - drop1[:, None] - drop2[None, :]
    rows, cols = linear_sum_assignment(np.minimum(gain, 0.0))
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if gain[i, j] < 0.0]
    return base + sum(float(gain[i, j]) for i, j in pairs), pairs


def _wasserstein_sq(b1: BranchDecompositionTree, b2: BranchDecompositionTree):
    """Squared distance and matched branch-id pairs."""
    i1, i2 = b1.index(), b2.index()
    kill1, kill2 = _subtree_destroy(b1), _subtree_destroy(b2)
    post1, post2 = list(reversed(b1.preorder())), list(reversed(b2.preorder()))
    value: dict[tuple[int, int], float] = {}
    kids: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for u in post1:
        cu = b1.children[u]
        d1 = np.array([kill1[c] for c in cu])
        for w in post2:
            cw = b2.children[w]
            d2 = np.array([kill2[c] for c in cw])
            C = np.array([[value[c, d] for d in cw] for c in cu]).reshape(len(cu), len(cw))
            sub, pairs = _assign(C, d1, d2)
            value[u, w] = ground_distance(i1[u].point, i2[w].point) ** 2 + sub
            kids[u, w] = [(cu[i], cw[j]) for i, j in pairs]
    r1, r2 = b1.branches[0].id, b2.branches[0].id
    matching, stack = [], [(r1, r2)]
    while stack:
        u, w = stack.pop()
        matching.append((u, w))
        stack.extend(kids[u, w])
    return value[r1, r2], sorted(matching)


def wasserstein_distance(b1: BranchDecompositionTree, b2: BranchDecompositionTree):
    """Return ``(distance, matching)`` between two BDTs.

    ``matching`` lists matched ``(branch id in b1, branch id in b2)`` pairs;
    every other branch goes to its diagonal projection.
    """
    sq, matching = _wasserstein_sq(b1, b2)
    return math.sqrt(max(sq, 0.0)), matching


def normalize(bdt: BranchDecompositionTree) -> BranchDecompositionTree:
    """Express each non-main branch relative to its parent's birth/death range."""
    if bdt.normalized:
        return bdt
    idx = bdt.index()
    out = []
    for b in bdt.branches:
        if b.parent is None:
            out.append(b)
            continue
        p = idx[b.parent]
        span = p.death - p.birth
        if not span > 0:
            raise ValueError(f"degenerate parent branch {p.id}")
        out.append(Branch(b.id, (b.birth - p.birth) / span, (b.death - p.birth) / span, b.parent, b.nodes))
    return BranchDecompositionTree(out, kind=bdt.kind, normalized=True)


def denormalize(bdt: BranchDecompositionTree) -> BranchDecompositionTree:
    """Recursively restore absolute coordinates of a normalized BDT."""
    if not bdt.normalized:
        return bdt
    idx = bdt.index()
    absolute: dict[int, tuple[float, float]] = {}
    for bid in bdt.preorder():
        b = idx[bid]
        if b.parent is None:
            absolute[bid] = (b.birth, b.death)
        else:
            px, py = absolute[b.parent]
            absolute[bid] = (px + b.birth * (py - px), px + b.death * (py - px))
    out = [Branch(b.id, *absolute[b.id], b.parent, b.nodes) for b in bdt.branches]
    return BranchDecompositionTree(out, kind=bdt.kind, normalized=False)


def satisfies_nesting(bdt: BranchDecompositionTree, tol: float = 1e-9) -> bool:
    """Every branch range lies inside its parent's range (absolute coordinates)."""
    bdt = denormalize(bdt)
    idx = bdt.index()
    for b in bdt.branches:
        if b.death < b.birth - tol:
            return False
        if b.parent is not None:
            p = idx[b.parent]
            if b.birth < p.birth - tol or b.death > p.death + tol:
                return False
    return True


def tree_to_bdt(tree: MergeTree, normalized: bool = True) -> BranchDecompositionTree:
    bdt = branch_decomposition_elder(tree)
    return normalize(bdt) if normalized else bdt


def bdt_to_tree(bdt: BranchDecompositionTree, tol: float = 1e-9) -> MergeTree:
    """Invert a BDT into a merge tree by hanging each branch off its parent at its birth.

    Branches of (near) zero persistence are dropped with their subtrees.
    """
    bdt = denormalize(bdt)
    idx = bdt.index()
    main = bdt.branches[0]
    scale = max(1.0, abs(main.birth), abs(main.death))
    eps = tol * scale
    if not main.death - main.birth > eps:
        raise ValueError("main branch has no persistence")
    f: dict[int, float] = {0: main.birth, 1: main.death}
    parent: dict[int, int | None] = {0: None, 1: 0}
    # per branch: sorted list of (scalar, node) along its path
    paths: dict[int, list[tuple[float, int]]] = {main.id: [(main.birth, 0), (main.death, 1)]}
    start_node = {main.id: 0}
    for bid in bdt.preorder()[1:]:
        b = idx[bid]
        if b.parent not in paths or not b.death - b.birth > eps:
            continue
        p = idx[b.parent]
        if b.birth < p.birth - eps or b.death > p.death + eps:
            raise ValueError(f"branch {bid} is not nested in its parent {p.id}")
        path = paths[b.parent]
        if b.birth <= path[0][0] + eps:
            if b.parent == main.id:
                raise ValueError(f"branch {bid} is born at the root")
            attach = start_node[b.parent]
            x = f[attach]
        else:
            pos = next(i for i, (s, _) in enumerate(path) if s > b.birth - eps)
            if abs(path[pos][0] - b.birth) <= eps and pos < len(path) - 1:
                attach, x = path[pos][1], path[pos][0]
            elif abs(path[pos][0] - b.birth) <= eps:
                # born at the parent's leaf: place the saddle just below it
                raise ValueError(f"branch {bid} is born at the end of its parent")
            else:
                attach = len(f)
                x = b.birth
                f[attach] = x
                below, above = path[pos - 1][1], path[pos][1]
                parent[attach] = below
                parent[above] = attach
                path.insert(pos, (x, attach))
        if not b.death - x > eps:
            continue
        leaf = len(f)
        f[leaf] = b.death
        parent[leaf] = attach
        paths[bid] = [(x, attach), (b.death, leaf)]
        start_node[bid] = attach
    return MergeTree.from_internal(f, parent, kind=bdt.kind, root=0)


def _without_flat(branches: list[Branch], kind: str) -> BranchDecompositionTree:
    """Drop zero-persistence branches together with their descendants."""
    keep: dict[int, Branch] = {}
    for b in branches:
        if b.parent is not None and (b.parent not in keep or _on_diagonal(b.point)):
            continue
        keep[b.id] = b
    return BranchDecompositionTree(list(keep.values()), kind=kind, normalized=True)


def _ordered(branches: list[Branch]) -> list[Branch]:
    """Parents before children, main branch first."""
    by_parent: dict[int | None, list[Branch]] = {}
    for b in branches:
        by_parent.setdefault(b.parent, []).append(b)
    out, stack = [], list(by_parent.get(None, []))
    while stack:
        b = stack.pop(0)
        out.append(b)
        stack.extend(by_parent.get(b.id, []))
    return out


def wasserstein_interpolate(b1: BranchDecompositionTree, b2: BranchDecompositionTree, alpha: float,
                            matching=None) -> BranchDecompositionTree:
    """Point on the geodesic between two normalized BDTs."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    b1, b2 = normalize(b1), normalize(b2)
    if matching is None:
        _, matching = wasserstein_distance(b1, b2)
    i1, i2 = b1.index(), b2.index()
    fwd = dict(matching)
    back = {w: u for u, w in matching}

    def lerp(p, q):
        return ((1 - alpha) * p[0] + alpha * q[0], (1 - alpha) * p[1] + alpha * q[1])

    out = []
    for b in b1.branches:
        target = i2[fwd[b.id]].point if b.id in fwd else diagonal_projection(b.point)
        out.append(Branch(b.id, *lerp(b.point, target), b.parent))
    next_id = max(i1) + 1
    new_id: dict[int, int] = {}
    for wid in b2.preorder():
        if wid in back:
            continue
        c = i2[wid]
        pid = back[c.parent] if c.parent in back else new_id[c.parent]
        new_id[wid] = next_id
        out.append(Branch(next_id, *lerp(diagonal_projection(c.point), c.point), pid))
        next_id += 1
    return _without_flat(_ordered(out), b1.kind)


def wasserstein_barycenter(bdts: Sequence[BranchDecompositionTree], init_index: int = 0,
                           max_iter: int = 100, rel_tol: float = 0.01, init=None):
    """Alternate optimal assignments and arithmetic-mean updates.

    Returns ``(barycenter, energy_trace)`` where the barycenter is a
    normalized BDT and ``energy_trace[t]`` is the sum of squared distances
    of the t-th candidate to all members.
    """
    if not bdts:
        raise ValueError("barycenter of an empty set")
    members = [normalize(b) for b in bdts]
    cand = normalize(init) if init is not None else members[init_index]
    cand = BranchDecompositionTree([Branch(b.id, b.birth, b.death, b.parent) for b in cand.branches],
                                   kind=cand.kind, normalized=True)
    results = [_wasserstein_sq(cand, m) for m in members]
    trace = [sum(r[0] for r in results)]
    for _ in range(max_iter):
        cand = _barycenter_update(cand, members, [r[1] for r in results])
        results = [_wasserstein_sq(cand, m) for m in members]
        trace.append(sum(r[0] for r in results))
        prev, cur = trace[-2], trace[-1]
        if prev <= 0 or abs(prev - cur) / prev < rel_tol:
            break
    return cand, trace


def _barycenter_update(cand: BranchDecompositionTree, members, matchings) -> BranchDecompositionTree:
    k = len(members)
    ci = cand.index()
    acc = {bid: np.zeros(2) for bid in ci}
    added: list[Branch] = []
    next_id = max(ci) + 1
    for m, matching in zip(members, matchings):
        mi = m.index()
        fwd = dict(matching)
        back = {w: u for u, w in matching}
        for bid, b in ci.items():
            acc[bid] += mi[fwd[bid]].point if bid in fwd else diagonal_projection(b.point)
        new_id: dict[int, int] = {}
        for wid in m.preorder():
            if wid in back:
                continue
            c = mi[wid]
            pid = back[c.parent] if c.parent in back else new_id[c.parent]
            d = diagonal_projection(c.point)
            x = (c.birth + (k - 1) * d[0]) / k
            y = (c.death + (k - 1) * d[1]) / k
            new_id[wid] = next_id
            added.append(Branch(next_id, float(x), float(y), pid))
            next_id += 1
    moved = [Branch(bid, *map(float, acc[bid] / k), b.parent) for bid, b in ci.items()]
    return _without_flat(_ordered(moved + added), cand.kind)


def tree_wasserstein_distance(t1: MergeTree, t2: MergeTree, normalized: bool = True) -> float:
    """Wasserstein distance between the elder-rule BDTs of two merge trees."""
    return wasserstein_distance(tree_to_bdt(t1, normalized), tree_to_bdt(t2, normalized))[0]
