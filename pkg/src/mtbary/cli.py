"""Command-line interface: one ``mtbary`` binary with subcommands.

Exit status is 0 on success, 1 on a usage error and 2 when an input file or
value is rejected.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

import numpy as np

from . import io as mtio
from .ensemble import distance_matrix, kmeans, temporal_reconstruct, temporal_reduce
from .fields import join_tree, simplify, split_tree
from .interpolation import geodesic, pm_barycenter, sample
from .pathmapping import path_mapping_distance
from .synth import AnalyticConfig, gen_analytical, gen_geodesic_series, gen_swap_clusters
from .tree import BranchDecompositionTree, MergeTree
from .wasserstein import (
    bdt_to_tree,
    normalize,
    tree_to_bdt,
    wasserstein_barycenter,
    wasserstein_distance,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(x: float) -> str:
    return f"{x:.9f}"


# ---------------------------------------------------------------------------
# input handling


def _load_any(path: str, args, labels: list | None = None):
    """Trees (or BDTs) from a tree/BDT JSON, a grid text file or a manifest."""
    p = Path(path)
    if p.suffix == ".json":
        data = mtio._read_json(p)
        if isinstance(data, dict) and "members" in data:
            m = mtio.load_manifest(p)
            out = []
            for member in m.paths():
                out += _load_any(str(member), args)
            if labels is not None and m.labels is not None:
                labels.extend(m.labels)
            return out
        if isinstance(data, dict) and "branches" in data:
            return [mtio.bdt_from_dict(data, str(p))]
        return [mtio.tree_from_dict(data, str(p))]
    grid = mtio.load_grid(p)
    tree = join_tree(grid) if args.kind == "join" else split_tree(grid)
    if args.threshold:
        tree = simplify(tree, args.threshold)
    return [tree]


def _load_inputs(paths, args, labels: list | None = None) -> list:
    out = []
    for p in paths:
        out += _load_any(p, args, labels)
    if not out:
        raise ValueError("no input trees")
    return out


def _as_trees(items) -> list[MergeTree]:
    out = []
    for x in items:
        out.append(bdt_to_tree(x) if isinstance(x, BranchDecompositionTree) else x)
    return out


def _as_bdts(items) -> list[BranchDecompositionTree]:
    return [normalize(x) if isinstance(x, BranchDecompositionTree) else tree_to_bdt(x) for x in items]


class _Output:
    """Primary output: the ``--out`` file or standard output."""

    def __init__(self, args):
        self.path = args.out

    def write(self, text: str) -> None:
        if self.path is None:
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text)


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _csv(rows, header) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _energy_csv(trace) -> str:
    return _csv([(i, _fmt(e)) for i, e in enumerate(trace)], ["iteration", "energy"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_tree(args) -> int:
    grid = mtio.load_grid(args.grid)
    tree = join_tree(grid) if args.kind == "join" else split_tree(grid)
    if args.threshold:
        tree = simplify(tree, args.threshold)
    tree = tree.compact()
    _Output(args).write(mtio.dumps_tree(tree))
    if args.dot:
        Path(args.dot).write_text(mtio.export_dot(tree, highlight="branch"))
    _info(args, f"{len(tree)} nodes, {len(tree.leaves())} leaves")
    return EXIT_OK


def cmd_simplify(args) -> int:
    tree = mtio.load_tree(args.tree)
    out = simplify(tree, args.threshold).compact()
    _Output(args).write(mtio.dumps_tree(out))
    if args.dot:
        Path(args.dot).write_text(mtio.export_dot(out, highlight="branch"))
    _info(args, f"{len(tree.leaves())} -> {len(out.leaves())} leaves")
    return EXIT_OK


def cmd_dist(args) -> int:
    a, b = (_load_any(p, args) for p in args.inputs)
    if len(a) != 1 or len(b) != 1:
        raise ValueError("dist takes two trees, not manifests")
    a, b = a[0], b[0]
    if args.metric == "path":
        a, b = _as_trees([a, b])
        res = path_mapping_distance(a, b)
        value = res.cost
        if args.witness:
            mtio.save_mapping(res.mapping, args.witness)
        if args.dot:
            Path(args.dot).write_text(mtio.export_dot(a, highlight=res.mapping, side=0, name="first")
                                      + mtio.export_dot(b, highlight=res.mapping, side=1, name="second"))
    else:
        value = wasserstein_distance(*_as_bdts([a, b]))[0]
    _Output(args).write(_fmt(value) + "\n")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    t0, t1 = _as_trees([_load_any(p, args)[0] for p in args.inputs])
    if not 0.0 <= args.alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    out = sample(geodesic(t0, t1), args.alpha)
    _Output(args).write(mtio.dumps_tree(out))
    return EXIT_OK


def _init_index(args, n: int) -> int:
    if args.init == "random":
        return int(np.random.default_rng(args.seed).integers(n))
    try:
        idx = int(args.init)
    except ValueError:
        raise UsageError(f"--init expects a member index or 'random', got {args.init!r}") from None
    if not 0 <= idx < n:
        raise ValueError(f"--init {idx} is out of range for {n} members")
    return idx


def cmd_barycenter(args) -> int:
    items = _load_inputs(args.inputs, args)
    init = _init_index(args, len(items))
    if args.metric == "path":
        trees = _as_trees(items)
        res = pm_barycenter(trees, variant=args.variant, init_index=init,
                            max_iter=args.max_iter, rel_tol=args.tol)
        trace, sizes, text = res.energy_trace, res.size_trace, mtio.dumps_tree(res.tree)
        _info(args, f"{res.iterations} iterations, energy {_fmt(trace[0])} -> {_fmt(trace[-1])}")
    else:
        if args.variant != "mean":
            raise ValueError("the Wasserstein barycenter has no median variant")
        bdts = _as_bdts(items)
        bary, trace = wasserstein_barycenter(bdts, init_index=init, max_iter=args.max_iter, rel_tol=args.tol)
        sizes = []
        text = mtio.dumps_tree(bdt_to_tree(bary)) if args.as_tree else json.dumps(
            mtio.bdt_to_dict(bary), indent=1) + "\n"
        _info(args, f"{len(trace) - 1} iterations, energy {_fmt(trace[0])} -> {_fmt(trace[-1])}")
    _Output(args).write(text)
    if args.trace:
        Path(args.trace).write_text(_energy_csv(trace))
    if args.size_trace and sizes:
        Path(args.size_trace).write_text(_csv(list(enumerate(sizes)), ["iteration", "nodes"]))
    return EXIT_OK


def _read_truth(path) -> list:
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["member", "label"]:
        raise mtio.FormatError(f"{path}: line 1: expected header 'member,label'")
    out = {}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise mtio.FormatError(f"{path}: line {n}: expected two columns")
        try:
            out[int(row[0])] = row[1].strip()
        except ValueError:
            raise mtio.FormatError(f"{path}: line {n}: member must be an integer") from None
    if sorted(out) != list(range(len(out))):
        raise mtio.FormatError(f"{path}: members must be numbered 0..n-1")
    return [out[i] for i in range(len(out))]


def cmd_cluster(args) -> int:
    labels: list = []
    items = _as_trees(_load_inputs(args.inputs, args, labels))
    truth = _read_truth(args.truth) if args.truth else (labels or None)
    if truth is not None and len(truth) != len(items):
        raise ValueError(f"{len(truth)} ground-truth labels for {len(items)} members")
    res = kmeans(items, args.k, metric=args.metric, runs=args.runs, seed=args.seed, truth=truth,
                 variant=args.variant, threads=args.threads)
    _Output(args).write(_csv(enumerate(res.assignments), ["member", "cluster"]))
    if args.runs_out:
        rows = [(i, r["seed"], _fmt(r["energy"]), r["rounds"],
                 _fmt(r["ari"]) if "ari" in r else "", int(r["correct"]) if "correct" in r else "")
                for i, r in enumerate(res.runs)]
        Path(args.runs_out).write_text(_csv(rows, ["run", "seed", "energy", "rounds", "ari", "correct"]))
    msg = f"best run {res.best_run}, energy {_fmt(res.energy)}"
    if res.ari is not None:
        msg += f", ARI {_fmt(res.ari)}"
    _info(args, msg)
    return EXIT_OK


def cmd_reduce(args) -> int:
    trees = _as_trees(_load_inputs(args.inputs, args))
    if not 2 <= args.keep <= len(trees):
        raise ValueError(f"--keep must lie in [2, {len(trees)}]")
    keys = temporal_reduce(trees, args.keep, metric=args.metric)
    res = temporal_reconstruct(trees, keys, metric=args.metric)
    rows = [(r["index"], int(r["keyframe"]), _fmt(r["path"]), _fmt(r["wasserstein"])) for r in res.errors]
    _Output(args).write(_csv(rows, ["index", "keyframe", "path", "wasserstein"]))
    _info(args, "keyframes: " + " ".join(map(str, keys)))
    return EXIT_OK


def cmd_matrix(args) -> int:
    items = _as_trees(_load_inputs(args.inputs, args))
    D = distance_matrix(items, metric=args.metric, threads=args.threads)
    n = len(items)
    rows = [[i] + [_fmt(x) for x in D[i]] for i in range(n)]
    _Output(args).write(_csv(rows, ["member"] + [str(j) for j in range(n)]))
    return EXIT_OK


def _write_members(outdir: Path, names, texts, labels=None, times=None) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in zip(names, texts):
        (outdir / name).write_text(text)
    mtio.save_manifest(mtio.Manifest(list(names), labels, times), outdir / "manifest.json")


def cmd_gen(args) -> int:
    if args.out is None:
        raise UsageError("gen needs --out DIR")
    outdir = Path(args.out)
    if args.what == "analytic":
        cfg = AnalyticConfig(members=args.members, width=args.width, height=args.height, seed=args.seed,
                             jitter=args.jitter)
        grids = gen_analytical(cfg)
        names = [f"member_{i:03d}.txt" for i in range(len(grids))]
        _write_members(outdir, names, [mtio.dumps_grid(g) for g in grids])
    elif args.what == "swap-clusters":
        grids, labels = gen_swap_clusters(args.phases, args.per_phase, seed=args.seed)
        names = [f"member_{i:03d}.txt" for i in range(len(grids))]
        _write_members(outdir, names, [mtio.dumps_grid(g) for g in grids], labels=labels)
    else:
        if len(args.inputs) != 2:
            raise UsageError("gen geodesic-series needs two tree files")
        t0, t1 = (mtio.load_tree(p) for p in args.inputs)
        series = gen_geodesic_series(t0, t1, args.n)
        names = [f"frame_{i:03d}.json" for i in range(len(series))]
        _write_members(outdir, names, [mtio.dumps_tree(t) for t in series], times=list(range(len(series))))
    _info(args, f"wrote {len(names)} members to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(sub: bool) -> argparse.ArgumentParser:
    # given before or after the subcommand; subcommand copies must not clobber earlier values
    d = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d if sub else 42, help="random seed (default 42)")
    g.add_argument("--metric", choices=["path", "wasserstein"], default=d if sub else "path")
    g.add_argument("--out", default=d, help="output file (directory for gen); default stdout")
    g.add_argument("--quiet", action="store_true", default=d if sub else False)
    g.add_argument("--threads", type=int, default=d if sub else 1,
                   help="concurrent distance computations (default 1)")
    g.add_argument("--kind", choices=["split", "join"], default=d if sub else "split",
                   help="merge tree type for grid inputs")
    g.add_argument("--threshold", type=float, default=d if sub else 0.0,
                   help="simplification threshold for grid inputs, fraction of the range")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtbary", parents=[_common(False)],
                     description="Merge tree distances, geodesics, barycenters and ensemble analysis.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    common = [_common(True)]

    p = sub.add_parser("tree", parents=common, help="merge tree of a grid file")
    p.add_argument("grid")
    p.add_argument("--dot", help="also write a Graphviz file coloured by branch")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("simplify", parents=common, help="persistence simplification")
    p.add_argument("tree")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("dist", parents=common, help="distance between two trees")
    p.add_argument("inputs", nargs=2, metavar="TREE")
    p.add_argument("--witness", help="write the optimal path mapping as JSON")
    p.add_argument("--dot", help="write both trees as Graphviz, coloured by mapped path")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("geodesic", parents=common, help="interpolate between two trees")
    p.add_argument("inputs", nargs=2, metavar="TREE")
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("barycenter", parents=common, help="barycenter of an ensemble")
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.add_argument("--variant", choices=["mean", "median"], default="mean")
    p.add_argument("--init", default="0", help="member index or 'random' (uses --seed)")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=0.01, help="relative energy change to stop at")
    p.add_argument("--trace", help="energy trace CSV")
    p.add_argument("--size-trace", help="node count per iteration CSV (path metric)")
    p.add_argument("--as-tree", action="store_true", help="write the Wasserstein result as a merge tree")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("cluster", parents=common, help="k-means clustering")
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--variant", choices=["mean", "median"], default="mean")
    p.add_argument("--truth", help="CSV 'member,label' with ground-truth labels")
    p.add_argument("--runs-out", help="per-run CSV")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("reduce", parents=common, help="keyframe reduction of a time series")
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.add_argument("--keep", type=int, required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("matrix", parents=common, help="pairwise distance matrix")
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("gen", parents=common, help="synthetic data")
    p.add_argument("what", choices=["analytic", "swap-clusters", "geodesic-series"])
    p.add_argument("inputs", nargs="*", metavar="TREE", help="endpoints for geodesic-series")
    p.add_argument("--members", type=int, default=20)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--phases", type=int, default=3)
    p.add_argument("--per-phase", type=int, default=4)
    p.add_argument("--n", type=int, default=10, help="frames of a geodesic series")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "mtbary: error: a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        msg = str(exc)
        if not msg.startswith("usage:"):
            msg = f"{parser.format_usage()}mtbary: error: {msg}"
        print(msg, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"mtbary: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def console() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console()
