import numpy as np
import pytest

from mtbary.synth import random_merge_tree
from mtbary.tree import MergeTree


def chain(values, parents, kind="split"):
    return MergeTree(dict(enumerate(values)), dict(enumerate(parents)), kind=kind)


@pytest.fixture
def fig3():
    """Three small trees with hand-checked distances; node ids follow A..F."""
    A, B, C, D, E, F = range(6)
    t1 = MergeTree({A: 0, B: 5, D: 11, F: 9}, {A: None, B: A, D: B, F: B})
    t2 = MergeTree({A: 0, B: 5, D: 10, F: 9}, {A: None, B: A, D: B, F: B})
    t3 = MergeTree({A: 0, B: 2, C: 5.5, D: 9, E: 7.5, F: 6},
                   {A: None, B: A, C: B, D: C, E: C, F: B})
    return t1, t2, t3


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pair(rng, max_edges=6, integer=None):
    integer = bool(rng.integers(2)) if integer is None else integer
    a = random_merge_tree(rng, int(rng.integers(1, max_edges + 1)), integer=integer)
    b = random_merge_tree(rng, int(rng.integers(1, max_edges + 1)), integer=integer)
    return a, b


CRITERIA: dict[int, str] = {}


@pytest.fixture
def report():
    """Record the verdict of one acceptance criterion for the end-of-run summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
