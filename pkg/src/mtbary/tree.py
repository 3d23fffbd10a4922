"""Abstract merge trees, edge labels and elder-rule branch decompositions.

Split and join trees share one representation: node values are kept in a
"split orientation" (``tree.f``), where every child lies strictly above its
parent.  Join trees store negated field values and carry ``kind="join"``;
``tree.scalar(v)`` always returns the value in field units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

REL_TOL = 1e-9

__all__ = [
    "MergeTree",
    "Violation",
    "Branch",
    "BranchDecompositionTree",
    "validate_merge_tree",
    "check_merge_tree",
    "edge_length",
    "path_length",
    "edge_labels",
    "branch_decomposition_elder",
    "set_root_value",
    "relabel_from_edge_lengths",
    "contract_regular_nodes",
    "canonical_form",
    "is_isomorphic",
    "cleanup_tree",
]


class MergeTree:
    """Rooted, unordered tree with a scalar value on each node.

    Construction never validates; use :func:`validate_merge_tree` or
    :func:`check_merge_tree`.  Instances are treated as immutable.

    Parameters
    ----------
    scalars : mapping of node id to field value
    parents : mapping of node id to parent id (``None`` for the root)
    kind : {"split", "join"}
    root : int, optional
        Explicit root id.  Inferred from ``parents`` when omitted.
    """

    __slots__ = ("kind", "root", "parent", "f", "children", "nodes", "_order")

    def __init__(
        self,
        scalars: Mapping[int, float],
        parents: Mapping[int, int | None],
        kind: str = "split",
        root: int | None = None,
    ):
        if kind not in ("split", "join"):
            raise ValueError(f"unknown tree kind {kind!r}")
        if set(scalars) != set(parents):
            raise ValueError("scalars and parents must cover the same node ids")
        sign = 1.0 if kind == "split" else -1.0
        self.kind = kind
        self.nodes = tuple(sorted(int(v) for v in scalars))
        self.f = {int(v): sign * float(s) for v, s in scalars.items()}
        self.parent = {int(v): (None if p is None else int(p)) for v, p in parents.items()}
        children: dict[int, list[int]] = {v: [] for v in self.nodes}
        for v in self.nodes:
            p = self.parent[v]
            if p is not None and p in children:
                children[p].append(v)
        self.children = {v: tuple(sorted(c)) for v, c in children.items()}
        if root is None:
            roots = [v for v in self.nodes if self.parent[v] is None]
            root = roots[0] if len(roots) == 1 else None
        self.root = root
        self._order = None

    @classmethod
    def from_internal(cls, f: Mapping[int, float], parents: Mapping[int, int | None],
                      kind: str = "split", root: int | None = None) -> "MergeTree":
        """Build from split-oriented values (negated field values for join trees)."""
        sign = 1.0 if kind == "split" else -1.0
        return cls({v: sign * x for v, x in f.items()}, parents, kind=kind, root=root)

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"MergeTree(kind={self.kind!r}, nodes={len(self.nodes)}, root={self.root})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, MergeTree):
            return NotImplemented
        return (self.kind == other.kind and self.root == other.root
                and self.parent == other.parent and self.f == other.f)

    def __hash__(self):
        return id(self)

    def scalar(self, v: int) -> float:
        """Field value of node ``v``."""
        return self.f[v] if self.kind == "split" else -self.f[v]

    @property
    def scalars(self) -> dict[int, float]:
        return {v: self.scalar(v) for v in self.nodes}

    def edges(self) -> list[tuple[int, int]]:
        """All edges as ``(child, parent)`` pairs."""
        return [(v, self.parent[v]) for v in self.nodes if self.parent[v] is not None]

    def leaves(self) -> list[int]:
        return [v for v in self.nodes if not self.children[v] and v != self.root]

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def length(self, v: int) -> float:
        """Length of the edge from ``v`` to its parent."""
        return abs(self.f[v] - self.f[self.parent[v]])

    def preorder(self) -> list[int]:
        if self._order is None:
            order, stack = [], [self.root]
            while stack:
                v = stack.pop()
                order.append(v)
                stack.extend(reversed(self.children[v]))
            self._order = order
        return list(self._order)

    def postorder(self) -> list[int]:
        return self._postorder_from(self.root)

    def _postorder_from(self, v: int) -> list[int]:
        out, stack = [], [(v, False)]
        while stack:
            u, done = stack.pop()
            if done:
                out.append(u)
            else:
                stack.append((u, True))
                stack.extend((c, False) for c in reversed(self.children[u]))
        return out

    def subtree(self, v: int) -> list[int]:
        """Nodes below and including ``v`` in preorder."""
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def ancestors(self, v: int) -> list[int]:
        """Strict ancestors of ``v`` ordered from the root down."""
        out = []
        p = self.parent[v]
        while p is not None:
            out.append(p)
            p = self.parent[p]
        return out[::-1]

    def total_length(self) -> float:
        return sum(self.length(v) for v in self.nodes if self.parent[v] is not None)

    def scalar_range(self) -> float:
        vals = list(self.f.values())
        return max(vals) - min(vals)

    def compact(self) -> "MergeTree":
        """Copy with dense ids ``0..n-1`` assigned in preorder."""
        order = self.preorder()
        new_id = {v: i for i, v in enumerate(order)}
        f = {new_id[v]: self.f[v] for v in order}
        par = {new_id[v]: (None if self.parent[v] is None else new_id[self.parent[v]]) for v in order}
        return MergeTree.from_internal(f, par, kind=self.kind, root=0)

    def scaled(self, factor: float) -> "MergeTree":
        return MergeTree.from_internal({v: factor * x for v, x in self.f.items()},
                                       self.parent, kind=self.kind, root=self.root)


@dataclass(frozen=True)
class Violation:
    """One failed clause of the abstract merge tree definition."""

    clause: str
    node: int | None
    message: str

    def __str__(self) -> str:
        return f"{self.clause} (node {self.node}): {self.message}"


def validate_merge_tree(tree: MergeTree) -> list[Violation]:
    """Return every violated merge tree condition; empty means valid."""
    out: list[Violation] = []
    roots = [v for v in tree.nodes if tree.parent[v] is None]
    if len(roots) != 1:
        out.append(Violation("single-root", None, f"expected exactly one parentless node, found {roots}"))
    if tree.root is not None and tree.parent.get(tree.root, 0) is not None:
        out.append(Violation("single-root", tree.root, "declared root has a parent"))
    for v in tree.nodes:
        p = tree.parent[v]
        if p is not None and p not in tree.f:
            out.append(Violation("parent-missing", v, f"parent {p} is not a node"))
    # cycles: walk up from every node
    state: dict[int, int] = {}
    for v in tree.nodes:
        path = []
        u = v
        while u is not None and u in tree.f and state.get(u) is None:
            state[u] = 1
            path.append(u)
            u = tree.parent[u]
        if u is not None and u in tree.f and state.get(u) == 1:
            out.append(Violation("cycle", u, "parent references form a cycle"))
        for w in path:
            state[w] = 2
    if any(x.clause in ("cycle", "parent-missing") for x in out):
        return out
    if tree.root is not None and tree.parent.get(tree.root) is None:
        if len(tree.children[tree.root]) != 1:
            out.append(Violation("root-degree", tree.root,
                                 f"root has {len(tree.children[tree.root])} children, expected 1"))
    for v in tree.nodes:
        if v != tree.root and len(tree.children[v]) == 1:
            out.append(Violation("inner-degree", v, "inner node has exactly one child"))
    for c, p in tree.edges():
        if not tree.f[c] > tree.f[p]:
            out.append(Violation("monotonicity", c,
                                 f"scalar {tree.scalar(c)} is not beyond parent scalar {tree.scalar(p)}"))
    return out


def check_merge_tree(tree: MergeTree) -> MergeTree:
    """Raise ``ValueError`` listing all violations if ``tree`` is invalid."""
    violations = validate_merge_tree(tree)
    if violations:
        raise ValueError("invalid merge tree: " + "; ".join(map(str, violations)))
    return tree


def edge_length(tree: MergeTree, edge: tuple[int, int]) -> float:
    c, p = edge
    for v in (c, p):
        if v not in tree.f:
            raise KeyError(f"node not in tree: {v}")
    if tree.parent[c] != p:
        raise KeyError(f"({c}, {p}) is not an edge of the tree")
    return abs(tree.f[c] - tree.f[p])


def path_length(tree: MergeTree, path: Sequence[int]) -> float:
    """Sum of edge lengths along a root-to-leaf directed node sequence."""
    for v in path:
        if v not in tree.f:
            raise KeyError(f"node not in tree: {v}")
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += edge_length(tree, (b, a))
    return total


def edge_labels(tree: MergeTree) -> dict[int, float]:
    """Edge lengths keyed by child node id."""
    return {c: tree.length(c) for c, _ in tree.edges()}


def set_root_value(tree: MergeTree, value: float) -> MergeTree:
    """Shift all scalars so the root sits at ``value`` (field units)."""
    shift = tree.scalar(tree.root) - value
    return MergeTree({v: tree.scalar(v) - shift for v in tree.nodes}, tree.parent,
                     kind=tree.kind, root=tree.root)


def relabel_from_edge_lengths(parents: Mapping[int, int | None], lengths: Mapping[int, float],
                              root_value: float = 0.0, kind: str = "split") -> MergeTree:
    """Rebuild node scalars from edge lengths keyed by child id."""
    for c, ell in lengths.items():
        if not ell > 0:
            raise ValueError(f"edge length must be positive, got {ell} for node {c}")
    roots = [v for v, p in parents.items() if p is None]
    if len(roots) != 1:
        raise ValueError("parents must describe exactly one root")
    children: dict[int, list[int]] = {v: [] for v in parents}
    for v, p in parents.items():
        if p is not None:
            children[p].append(v)
    sign = 1.0 if kind == "split" else -1.0
    f = {roots[0]: sign * root_value}
    stack = [roots[0]]
    while stack:
        u = stack.pop()
        for c in children[u]:
            f[c] = f[u] + lengths[c]
            stack.append(c)
    return MergeTree.from_internal(f, parents, kind=kind, root=roots[0])


def contract_regular_nodes(tree: MergeTree) -> MergeTree:
    """Splice out non-root nodes with exactly one child."""
    parent = dict(tree.parent)
    for v in tree.preorder():
        if v != tree.root and len(tree.children[v]) == 1:
            (c,) = tree.children[v]
            parent[c] = parent[v]
            del parent[v]
    keep = set(parent)
    return MergeTree.from_internal({v: tree.f[v] for v in keep}, parent, kind=tree.kind, root=tree.root)


def canonical_form(tree: MergeTree, digits: int = 9):
    """Hashable representation invariant under node relabelling."""

    def rec(v):
        return (round(tree.f[v] + 0.0, digits), tuple(sorted(rec(c) for c in tree.children[v])))

    return (tree.kind, rec(tree.root))


def is_isomorphic(t1: MergeTree, t2: MergeTree, tol: float = 1e-7) -> bool:
    """Structural isomorphism with scalars equal up to ``tol``."""
    if t1.kind != t2.kind or len(t1) != len(t2):
        return False

    def match(u, v):
        if abs(t1.f[u] - t2.f[v]) > tol:
            return False
        cu, cv = t1.children[u], t2.children[v]
        if len(cu) != len(cv):
            return False
        used = [False] * len(cv)

        def assign(i):
            if i == len(cu):
                return True
            for j, w in enumerate(cv):
                if not used[j] and match(cu[i], w):
                    used[j] = True
                    if assign(i + 1):
                        return True
                    used[j] = False
            return False

        return assign(0)

    return match(t1.root, t2.root)


@dataclass(frozen=True)
class Branch:
    """Path ending in a leaf, with split-oriented birth/death values."""

    id: int
    birth: float
    death: float
    parent: int | None
    nodes: tuple[int, ...] = ()

    @property
    def persistence(self) -> float:
        return abs(self.death - self.birth)

    @property
    def leaf(self) -> int:
        return self.nodes[-1]

    @property
    def point(self) -> tuple[float, float]:
        return (self.birth, self.death)


@dataclass
class BranchDecompositionTree:
    """Branches of a merge tree and their parent-branch hierarchy.

    ``branches[0]`` is the main branch.  Coordinates are split-oriented, so
    ``birth <= death`` always holds.  When ``normalized`` is set, every
    non-main branch is expressed relative to the range of its parent branch.
    """

    branches: list[Branch]
    kind: str = "split"
    normalized: bool = False
    children: dict[int, list[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.children = {b.id: [] for b in self.branches}
        for b in self.branches:
            if b.parent is not None:
                self.children[b.parent].append(b.id)
        if self.branches and self.branches[0].parent is not None:
            raise ValueError("the first branch must be the main branch")

    def __len__(self):
        return len(self.branches)

    def by_id(self, bid: int) -> Branch:
        return self.index()[bid]

    def index(self) -> dict[int, Branch]:
        return {b.id: b for b in self.branches}

    def preorder(self) -> list[int]:
        out, stack = [], [self.branches[0].id]
        while stack:
            b = stack.pop()
            out.append(b)
            stack.extend(reversed(self.children[b]))
        return out

    @property
    def main(self) -> Branch:
        return self.branches[0]

    def edge_sets(self) -> list[set[tuple[int, int]]]:
        return [{(b, a) for a, b in zip(br.nodes, br.nodes[1:])} for br in self.branches]


def _elder_leaf(tree: MergeTree) -> dict[int, int]:
    """For each node, the leaf continuing the elder branch through it."""
    best: dict[int, int] = {}
    for v in tree.postorder():
        if not tree.children[v]:
            best[v] = v
        else:
            cands = [best[c] for c in tree.children[v]]
            best[v] = min(cands, key=lambda leaf: (-tree.f[leaf], leaf))
    return best


def branch_decomposition_elder(tree: MergeTree) -> BranchDecompositionTree:
    """Elder-rule branch decomposition (ties broken by smallest leaf id)."""
    check_merge_tree(tree)
    best = _elder_leaf(tree)
    branches: list[Branch] = []
    # queue of (start node, first child, parent branch id)
    queue = [(tree.root, tree.children[tree.root][0], None)]
    node_branch: dict[int, int] = {}
    while queue:
        start, first, pbid = queue.pop(0)
        nodes = [start]
        v = first
        while True:
            nodes.append(v)
            if not tree.children[v]:
                break
            nxt = next(c for c in tree.children[v] if best[c] == best[v])
            v = nxt
        bid = len(branches)
        br = Branch(bid, tree.f[start], tree.f[nodes[-1]], pbid, tuple(nodes))
        branches.append(br)
        for u in nodes[1:]:
            node_branch[u] = bid
        for u in nodes[1:-1]:
            on_path = nodes[nodes.index(u) + 1]
            for c in tree.children[u]:
                if c != on_path:
                    queue.append((u, c, bid))
    return BranchDecompositionTree(branches, kind=tree.kind)


def cleanup_tree(f: dict, parent: dict, root: int, kind: str, tol: float) -> MergeTree:
    """Drop near-zero edges and splice out nodes with one child.

    A near-zero leaf edge is removed; a near-zero inner edge is contracted
    into its parent.  The root keeps its single child.
    """
    f, parent = dict(f), dict(parent)
    children: dict[int, list[int]] = {v: [] for v in f}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)
    changed = True
    while changed:
        changed = False
        # deepest first, so zero-length subtrees vanish bottom-up
        order = []
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            stack.extend(children[u])
        for v in reversed(order):
            p = parent[v]
            if p is None:
                continue
            if f[v] - f[p] <= tol:
                if children[v] and p == root and len(children[v]) > 1:
                    continue
                for c in children[v]:
                    parent[c] = p
                    children[p].append(c)
                children[p].remove(v)
                del children[v], parent[v], f[v]
                changed = True
            elif len(children[v]) == 1:
                (c,) = children[v]
                parent[c] = p
                children[p].remove(v)
                children[p].append(c)
                del children[v], parent[v], f[v]
                changed = True
    return MergeTree.from_internal(f, parent, kind=kind, root=root)
