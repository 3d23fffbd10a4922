import csv
import hashlib
import io
import json
import os
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest

from mtbary import io as mtio
from mtbary.cli import main

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"
# set to rewrite the golden files after an intentional output change
REGEN = os.environ.get("MTBARY_REGEN") == "1"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def check_golden(name: str, text: str) -> None:
    path = GOLDEN / name
    if REGEN:
        path.parent.mkdir(exist_ok=True)
        path.write_text(text)
    assert text == path.read_text()


def d(name):
    return DATA / name


CASES = {
    "tree.json": ["tree", d("hills.txt")],
    "tree_join.json": ["tree", d("hills.txt"), "--kind", "join"],
    "simplify.json": ["simplify", d("t3.json"), "--threshold", "0.25"],
    "dist_path.txt": ["dist", d("t1.json"), d("t3.json")],
    "dist_wasserstein.txt": ["dist", "--metric", "wasserstein", d("t1.json"), d("t3.json")],
    "geodesic.json": ["geodesic", "--alpha", "0.5", d("t1.json"), d("t3.json")],
    "barycenter_mean.json": ["barycenter", d("t1.json"), d("t2.json"), d("t3.json")],
    "barycenter_median.json": ["barycenter", "--variant", "median", d("t1.json"), d("t2.json"), d("t3.json")],
    "barycenter_wasserstein.json": ["barycenter", "--metric", "wasserstein", d("t1.json"), d("t2.json"),
                                    d("t3.json")],
    "barycenter_random.json": ["barycenter", "--init", "random", "--seed", "3", d("t1.json"), d("t2.json"),
                               d("t3.json")],
    "cluster.csv": ["cluster", "--k", "2", d("ensemble.json")],
    "cluster_wasserstein.csv": ["cluster", "--k", "2", "--metric", "wasserstein", "--runs", "3",
                                d("ensemble.json")],
    "reduce.csv": ["reduce", "--keep", "2", d("t1.json"), d("t3.json"), d("t2.json")],
    "matrix.csv": ["matrix", d("t1.json"), d("t2.json"), d("t3.json")],
    "matrix_wasserstein.csv": ["matrix", "--metric", "wasserstein", "--threads", "2", d("ensemble.json")],
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_output(name):
    code, out, _ = run(*CASES[name])
    assert code == 0
    check_golden(name, out)
    assert run(*CASES[name])[1] == out


def test_dist_prints_one_float():
    code, out, _ = run("dist", "--metric", "path", d("t1.json"), d("t3.json"))
    assert code == 0 and float(out) == 6.0 and out.count("\n") == 1


def test_side_files(tmp_path):
    code, _, _ = run("dist", d("t1.json"), d("t3.json"), "--witness", tmp_path / "m.json",
                     "--dot", tmp_path / "m.dot")
    assert code == 0
    m = mtio.load_mapping(tmp_path / "m.json")
    assert len(m) == 3
    assert (tmp_path / "m.dot").read_text().count("digraph") == 2
    code, _, _ = run("tree", d("hills.txt"), "--dot", tmp_path / "t.dot", "--out", tmp_path / "t.json")
    assert code == 0 and mtio.load_tree(tmp_path / "t.json").kind == "split"
    check_golden("tree.dot", (tmp_path / "t.dot").read_text())


def test_barycenter_traces(tmp_path):
    args = ["barycenter", "--trace", tmp_path / "e.csv", "--size-trace", tmp_path / "s.csv",
            "--out", tmp_path / "b.json", d("t1.json"), d("t2.json"), d("t3.json")]
    assert run(*args)[0] == 0
    rows = list(csv.DictReader((tmp_path / "e.csv").open()))
    assert list(rows[0]) == ["iteration", "energy"]
    assert [int(r["iteration"]) for r in rows] == list(range(len(rows)))
    energies = [float(r["energy"]) for r in rows]
    assert energies[0] == 7.0
    check_golden("barycenter_trace.csv", (tmp_path / "e.csv").read_text())
    mtio.load_tree(tmp_path / "b.json")


def test_median_never_grows(tmp_path):
    files = [d("t3.json"), d("t1.json"), d("t2.json"), d("ens_0.json"), d("ens_1.json")]
    for init in ("0", "1", "3"):
        code, _, _ = run("barycenter", "--variant", "median", "--init", init, "--size-trace", tmp_path / "s.csv",
                         "--out", tmp_path / "b.json", *files)
        assert code == 0
        sizes = [int(r["nodes"]) for r in csv.DictReader((tmp_path / "s.csv").open())]
        assert all(b <= a for a, b in zip(sizes, sizes[1:]))


def test_wasserstein_barycenter_outputs(tmp_path):
    args = ["barycenter", "--metric", "wasserstein", d("t1.json"), d("t2.json"), d("t3.json")]
    code, out, _ = run(*args)
    bdt = mtio.bdt_from_dict(json.loads(out))
    assert bdt.branches[0].parent is None
    code, out, _ = run(*args, "--as-tree")
    assert mtio.tree_from_dict(json.loads(out)).kind == "split"
    assert run(*args, "--variant", "median")[0] == 2


def test_bdt_input(tmp_path):
    from mtbary.wasserstein import tree_to_bdt

    mtio.save_bdt(tree_to_bdt(mtio.load_tree(d("t3.json")), normalized=False), tmp_path / "b.json")
    code, out, _ = run("dist", "--metric", "wasserstein", d("t3.json"), tmp_path / "b.json")
    assert code == 0 and float(out) == 0.0
    code, out, _ = run("dist", d("t3.json"), tmp_path / "b.json")
    assert code == 0 and float(out) == 0.0


def test_cluster_outputs(tmp_path):
    code, out, err = run("cluster", "--k", "2", "--truth", d("truth.csv"), "--runs-out", tmp_path / "r.csv",
                         d("ensemble.json"))
    assert code == 0 and "ARI 1.000000000" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["member", "cluster"] and len(rows) == 6
    runs = list(csv.DictReader((tmp_path / "r.csv").open()))
    assert len(runs) == 5 and all(r["correct"] in ("0", "1") for r in runs)
    assert run("cluster", "--k", "2", "--quiet", d("ensemble.json"))[2] == ""


def test_reduce_table():
    code, out, _ = run("reduce", "--keep", "2", d("t1.json"), d("t3.json"), d("t2.json"))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["index", "keyframe", "path", "wasserstein"]
    assert [r["keyframe"] for r in rows] == ["1", "0", "1"]
    assert float(rows[0]["path"]) == 0.0 and float(rows[2]["wasserstein"]) == 0.0


def test_matrix_parses_back():
    code, out, _ = run("matrix", d("t1.json"), d("t2.json"), d("t3.json"))
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["member", "0", "1", "2"]
    assert [float(x) for x in rows[3][1:]] == [6.0, 7.0, 0.0]


def gen_digest(outdir: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(outdir.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest() + "\n"


def test_gen_geodesic_series(tmp_path):
    code, _, _ = run("gen", "geodesic-series", d("t1.json"), d("t3.json"), "--n", "5", "--out", tmp_path / "s")
    assert code == 0
    m = mtio.load_manifest(tmp_path / "s" / "manifest.json")
    assert m.times == [0, 1, 2, 3, 4] and len(m.paths()) == 5
    check_golden("gen_geodesic_series.sha256", gen_digest(tmp_path / "s"))
    code, out, _ = run("reduce", "--keep", "2", tmp_path / "s" / "manifest.json")
    assert code == 0
    assert [float(r["path"]) < 1e-6 for r in csv.DictReader(io.StringIO(out))] == [True] * 5


def test_gen_grids_are_reproducible(tmp_path):
    code, _, _ = run("gen", "analytic", "--members", "2", "--out", tmp_path / "a")
    assert code == 0
    run("gen", "analytic", "--members", "2", "--out", tmp_path / "b")
    assert gen_digest(tmp_path / "a") == gen_digest(tmp_path / "b")
    check_golden("gen_analytic.sha256", gen_digest(tmp_path / "a"))
    code, _, _ = run("gen", "swap-clusters", "--phases", "2", "--per-phase", "2", "--out", tmp_path / "c")
    m = mtio.load_manifest(tmp_path / "c" / "manifest.json")
    assert code == 0 and m.labels == [0, 0, 1, 1]
    check_golden("gen_swap_clusters.sha256", gen_digest(tmp_path / "c"))


@pytest.mark.parametrize("argv", [
    ["dist", "tests/data/t1.json"],
    ["frobnicate"],
    [],
    ["dist", "--metric", "cosine", "tests/data/t1.json", "tests/data/t2.json"],
    ["barycenter", "--init", "first", "tests/data/t1.json"],
    ["gen", "analytic"],
])
def test_usage_errors(argv):
    code, _, err = run(*argv)
    assert code == 1 and "usage" in err


def test_data_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "split", "root": 0, "nodes": [{"id": 0, "scalar": 0}]}')
    code, _, err = run("dist", bad, d("t1.json"))
    assert code == 2 and "node 0: missing field 'parent'" in err
    code, _, err = run("tree", tmp_path / "missing.txt")
    assert code == 2
    code, _, err = run("geodesic", "--alpha", "2", d("t1.json"), d("t2.json"))
    assert code == 2 and "alpha" in err
    code, _, err = run("cluster", "--k", "9", d("ensemble.json"))
    assert code == 2
    code, _, err = run("reduce", "--keep", "1", d("t1.json"), d("t2.json"))
    assert code == 2


def test_global_options_before_subcommand():
    code, out, _ = run("--metric", "wasserstein", "--quiet", "dist", d("t1.json"), d("t3.json"))
    assert code == 0
    assert out == run("dist", "--metric", "wasserstein", d("t1.json"), d("t3.json"))[1]


def test_help_exits_zero():
    assert run("--help")[0] == 0
