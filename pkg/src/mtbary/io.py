"""Reading and writing trees, grids, branch decompositions, mappings and manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import ScalarGrid
from .pathmapping import PathMapping
from .tree import Branch, BranchDecompositionTree, MergeTree, branch_decomposition_elder, check_merge_tree

__all__ = [
    "FormatError",
    "tree_to_dict",
    "tree_from_dict",
    "load_tree",
    "save_tree",
    "dumps_tree",
    "load_grid",
    "save_grid",
    "dumps_grid",
    "bdt_to_dict",
    "bdt_from_dict",
    "load_bdt",
    "save_bdt",
    "load_mapping",
    "save_mapping",
    "Manifest",
    "load_manifest",
    "save_manifest",
    "export_dot",
]


class FormatError(ValueError):
    """Malformed input file; the message names the offending line, node or field."""


def _num(x: float) -> float:
    # repr of a Python float is the shortest string that reads back to the same value
    return float(x)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def _read_json(path) -> object:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------------------
# trees


def tree_to_dict(tree: MergeTree) -> dict:
    return {
        "kind": tree.kind,
        "root": tree.root,
        "nodes": [{"id": v, "scalar": _num(tree.scalar(v)), "parent": tree.parent[v]} for v in tree.nodes],
    }


def tree_from_dict(data, source: str = "tree") -> MergeTree:
    if not isinstance(data, dict):
        raise FormatError(f"{source}: expected a JSON object")
    for key in ("kind", "root", "nodes"):
        if key not in data:
            raise FormatError(f"{source}: missing field {key!r}")
    if data["kind"] not in ("split", "join"):
        raise FormatError(f"{source}: field 'kind' must be 'split' or 'join', got {data['kind']!r}")
    if not isinstance(data["nodes"], list):
        raise FormatError(f"{source}: field 'nodes' must be a list")
    scalars, parents = {}, {}
    for pos, node in enumerate(data["nodes"]):
        label = f"{source}: node #{pos}"
        if not isinstance(node, dict):
            raise FormatError(f"{label}: expected an object")
        if "id" not in node:
            raise FormatError(f"{label}: missing field 'id'")
        nid = node["id"]
        if not isinstance(nid, int) or isinstance(nid, bool):
            raise FormatError(f"{label}: field 'id' must be an integer")
        label = f"{source}: node {nid}"
        for key in ("scalar", "parent"):
            if key not in node:
                raise FormatError(f"{label}: missing field {key!r}")
        s, p = node["scalar"], node["parent"]
        if not isinstance(s, (int, float)) or isinstance(s, bool) or not np.isfinite(s):
            raise FormatError(f"{label}: field 'scalar' must be a finite number")
        if p is not None and (not isinstance(p, int) or isinstance(p, bool)):
            raise FormatError(f"{label}: field 'parent' must be an integer or null")
        if nid in scalars:
            raise FormatError(f"{label}: duplicate id")
        scalars[nid], parents[nid] = float(s), p
    root = data["root"]
    if root not in scalars:
        raise FormatError(f"{source}: root {root!r} is not a node")
    tree = MergeTree(scalars, parents, kind=data["kind"], root=root)
    try:
        check_merge_tree(tree)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None
    return tree


def dumps_tree(tree: MergeTree) -> str:
    return _dump(tree_to_dict(tree))


def load_tree(path) -> MergeTree:
    return tree_from_dict(_read_json(path), str(path))


def save_tree(tree: MergeTree, path) -> None:
    Path(path).write_text(dumps_tree(tree))


# ---------------------------------------------------------------------------
# grids


def dumps_grid(grid: ScalarGrid) -> str:
    rows = grid.as_array()
    lines = [f"{grid.width} {grid.height}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def load_grid(path) -> ScalarGrid:
    lines = [ln for ln in Path(path).read_text().splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError(f"{path}: line 1: expected 'width height'")
    try:
        w, h = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError(f"{path}: line 1: width and height must be integers") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: line 1: width and height must be positive")
    body = lines[1:]
    if len(body) != h:
        raise FormatError(f"{path}: header declares {h} rows but the file has {len(body)}")
    values = np.empty((h, w))
    for r, line in enumerate(body):
        parts = line.split()
        if len(parts) != w:
            raise FormatError(f"{path}: line {r + 2}: expected {w} values, found {len(parts)}")
        try:
            values[r] = [float(x) for x in parts]
        except ValueError:
            raise FormatError(f"{path}: line {r + 2}: non-numeric value") from None
        if not np.all(np.isfinite(values[r])):
            raise FormatError(f"{path}: line {r + 2}: values must be finite")
    return ScalarGrid(w, h, values.ravel())


def save_grid(grid: ScalarGrid, path) -> None:
    Path(path).write_text(dumps_grid(grid))


# ---------------------------------------------------------------------------
# branch decomposition trees


def bdt_to_dict(bdt: BranchDecompositionTree) -> dict:
    """Absolute (not normalized) split-oriented coordinates; join trees add a ``kind`` key."""
    if bdt.normalized:
        from .wasserstein import denormalize

        bdt = denormalize(bdt)
    out: dict = {"branches": [{"id": b.id, "birth": _num(b.birth), "death": _num(b.death), "parent": b.parent}
                              for b in bdt.branches]}
    if bdt.kind != "split":
        out["kind"] = bdt.kind
    return out


def bdt_from_dict(data, source: str = "bdt") -> BranchDecompositionTree:
    if not isinstance(data, dict) or not isinstance(data.get("branches"), list):
        raise FormatError(f"{source}: expected an object with a 'branches' list")
    branches = []
    seen = set()
    for pos, b in enumerate(data["branches"]):
        if not isinstance(b, dict):
            raise FormatError(f"{source}: branch #{pos}: expected an object")
        for key in ("id", "birth", "death", "parent"):
            if key not in b:
                raise FormatError(f"{source}: branch #{pos}: missing field {key!r}")
        if b["id"] in seen:
            raise FormatError(f"{source}: branch {b['id']}: duplicate id")
        if b["death"] < b["birth"]:
            raise FormatError(f"{source}: branch {b['id']}: death below birth")
        seen.add(b["id"])
        branches.append(Branch(int(b["id"]), float(b["birth"]), float(b["death"]),
                               None if b["parent"] is None else int(b["parent"])))
    if not branches or branches[0].parent is not None:
        raise FormatError(f"{source}: the first branch must be the main branch (parent null)")
    for b in branches[1:]:
        if b.parent is None or b.parent not in seen:
            raise FormatError(f"{source}: branch {b.id}: parent {b.parent!r} is not a branch")
    kind = data.get("kind", "split")
    return BranchDecompositionTree(branches, kind=kind)


def load_bdt(path) -> BranchDecompositionTree:
    return bdt_from_dict(_read_json(path), str(path))


def save_bdt(bdt: BranchDecompositionTree, path) -> None:
    Path(path).write_text(_dump(bdt_to_dict(bdt)))


# ---------------------------------------------------------------------------
# mappings


def load_mapping(path) -> PathMapping:
    data = _read_json(path)
    try:
        return PathMapping.from_json(data)
    except (KeyError, TypeError):
        raise FormatError(f"{path}: expected {{'pairs': [{{'p1': [...], 'p2': [...]}}, ...]}}") from None


def save_mapping(mapping: PathMapping, path) -> None:
    Path(path).write_text(_dump(mapping.to_json()))


# ---------------------------------------------------------------------------
# manifests


@dataclass
class Manifest:
    """Member files of an ensemble or series, with optional labels and time indices.

    Paths are stored relative to the manifest's directory.
    """

    members: list[str]
    labels: list | None = None
    times: list | None = None
    base: Path = field(default=Path("."), repr=False, compare=False)

    def __post_init__(self):
        for name, seq in (("labels", self.labels), ("times", self.times)):
            if seq is not None and len(seq) != len(self.members):
                raise FormatError(f"manifest: {name} has {len(seq)} entries for {len(self.members)} members")

    def paths(self) -> list[Path]:
        return [self.base / m for m in self.members]

    def to_dict(self) -> dict:
        out: dict = {"members": list(self.members)}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.times is not None:
            out["times"] = list(self.times)
        return out


def load_manifest(path) -> Manifest:
    data = _read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get("members"), list):
        raise FormatError(f"{path}: manifest needs a 'members' list")
    m = Manifest(data["members"], data.get("labels"), data.get("times"), Path(path).parent)
    for p in m.paths():
        if not p.exists():
            raise FormatError(f"{path}: member file {p} does not exist")
    return m


def save_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(_dump(manifest.to_dict()))


# ---------------------------------------------------------------------------
# graphviz

_PALETTE = ["#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf",
            "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#17becf"]
UNMAPPED = "gray"


def export_dot(tree: MergeTree, highlight=None, side: int = 0, name: str = "mergetree") -> str:
    """Graphviz digraph of a tree, edges pointing from parent to child.

    ``highlight`` may be ``"branch"`` (one colour per elder-rule branch) or a
    :class:`PathMapping`, in which case the edges of each mapped pair on
    ``side`` share a colour and unmapped edges are gray.
    """
    colour: dict[tuple[int, int], str] = {}
    if isinstance(highlight, PathMapping):
        for i, pair in enumerate(highlight.pairs):
            p = pair[side]
            for a, b in zip(p, p[1:]):
                colour[(b, a)] = _PALETTE[i % len(_PALETTE)]
        default = UNMAPPED
    elif highlight == "branch":
        for i, edges in enumerate(branch_decomposition_elder(tree).edge_sets()):
            for e in edges:
                colour[e] = _PALETTE[i % len(_PALETTE)]
        default = "black"
    elif highlight is None:
        default = "black"
    else:
        raise ValueError("highlight must be None, 'branch' or a PathMapping")
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    for v in tree.nodes:
        lines.append(f'  n{v} [label="{v}\\n{tree.scalar(v):.6g}"];')
    for c, p in tree.edges():
        lines.append(f'  n{p} -> n{c} [color="{colour.get((c, p), default)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
