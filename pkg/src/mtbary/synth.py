"""Seeded generators for synthetic fields, ensembles and tree series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarGrid, simplify, split_tree
from .tree import MergeTree

__all__ = ["random_merge_tree", "AnalyticConfig", "gen_analytical", "gen_swap_clusters", "gen_geodesic_series"]


def random_merge_tree(rng: np.random.Generator, n_edges: int, kind: str = "split",
                      low: float = 0.5, high: float = 5.0, integer: bool = False) -> MergeTree:
    """Random valid merge tree with at most ``n_edges`` edges.

    Grows from a single root edge by either forking a leaf into two new
    leaves or adding a leaf to an inner node.  Edge lengths are uniform in
    ``[low, high]`` (integers when ``integer`` is set, which provokes ties).
    """
    if n_edges < 1:
        raise ValueError("a merge tree has at least one edge")
    parent: dict[int, int | None] = {0: None, 1: 0}
    children: dict[int, list[int]] = {0: [1], 1: []}
    n = 2
    while len(parent) - 1 < n_edges:
        budget = n_edges - (len(parent) - 1)
        leaves = [v for v in parent if v != 0 and not children[v]]
        inner = [v for v in parent if v != 0 and children[v]]
        if budget >= 2 and (not inner or rng.random() < 0.6):
            v = leaves[rng.integers(len(leaves))]
            for _ in range(2):
                parent[n], children[n] = v, []
                children[v].append(n)
                n += 1
        elif inner:
            v = inner[rng.integers(len(inner))]
            parent[n], children[n] = v, []
            children[v].append(n)
            n += 1
        else:
            break
    if integer:
        lengths = rng.integers(max(1, int(low)), int(high) + 1, size=n).astype(float)
    else:
        lengths = rng.uniform(low, high, size=n)
    f = {0: 0.0}
    for v in sorted(parent):
        if parent[v] is not None:
            f[v] = f[parent[v]] + lengths[v]
    return MergeTree.from_internal(f, parent, kind=kind, root=0)


@dataclass(frozen=True)
class AnalyticConfig:
    """Parameters of the four-hill ensemble with side peaks on one hill.

    Hills 1 and 2 merge first, hill 3 joins them and hill 0, which carries
    the side peaks on its outer flank, joins last.  Distinct saddle levels
    keep the merge order the same in every member.  Each hill draws its height from its own
    sub-range of ``main_heights``; the sub-ranges overlap, so which hill is
    highest changes between members.
    """

    members: int = 20
    width: int = 128
    height: int = 128
    seed: int = 42
    main_heights: tuple[float, float] = (0.9, 1.1)
    side_heights: tuple[float, float] = (0.25, 0.4)
    main_sigma: float = 8.0
    side_sigma: float = 3.0
    n_side: int = 5
    jitter: float = 2.0

    def validate(self) -> None:
        lo, hi = self.main_heights
        slo, shi = self.side_heights
        if not (0 < lo <= hi and 0 < slo <= shi):
            raise ValueError("height ranges must be positive and ordered")
        if shi >= lo:
            raise ValueError("side peaks must stay below every main peak")
        if self.members < 1 or self.n_side < 0 or self.jitter < 0:
            raise ValueError("members, n_side and jitter must be non-negative")
        if min(self.width, self.height) < 8 * self.main_sigma:
            raise ValueError("grid too small to keep four main hills separated")


def _bump_field(width: int, height: int, bumps) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    out = np.zeros((height, width))
    for x, y, h, s in bumps:
        out += h * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * s * s))
    return out


def _main_ranges(lo: float, hi: float, n: int = 4) -> list[tuple[float, float]]:
    # n sub-ranges of half the width, evenly staggered, so neighbours overlap
    w = (hi - lo) / 2
    return [(lo + i * (hi - lo - w) / (n - 1), lo + i * (hi - lo - w) / (n - 1) + w) for i in range(n)]


def analytic_layout(cfg: AnalyticConfig, rng: np.random.Generator):
    """Bump list ``(x, y, height, sigma)`` of one analytical member."""
    W, H = cfg.width, cfg.height
    centers = [(0.25, 0.30), (0.60, 0.62), (0.87, 0.62), (0.735, 0.88)]
    ranges = _main_ranges(*cfg.main_heights)
    # the side-peak hill draws from the second-highest range so it both leads and trails
    order = [2, 0, 1, 3]
    bumps = []
    for (cx, cy), ri in zip(centers, order):
        jx, jy = rng.uniform(-1, 1, 2) * cfg.jitter
        h = rng.uniform(*ranges[ri]) if cfg.jitter > 0 else sum(ranges[ri]) / 2
        bumps.append((cx * W + jx, cy * H + jy, h, cfg.main_sigma))
    hx, hy = bumps[0][0], bumps[0][1]
    # far enough out that the hill is nearly flat, so each side peak stands on its own
    radius = 3.0 * cfg.main_sigma
    # facing away from the other hills
    angles = np.linspace(np.pi * 0.75, np.pi * 1.75, cfg.n_side) if cfg.n_side > 1 else np.array([np.pi * 1.25])
    for a in angles:
        ja = rng.uniform(-1, 1) * cfg.jitter / radius
        h = rng.uniform(*cfg.side_heights) if cfg.jitter > 0 else sum(cfg.side_heights) / 2
        bumps.append((hx + radius * np.cos(a + ja), hy + radius * np.sin(a + ja), h, cfg.side_sigma))
    return bumps


def gen_analytical(config: AnalyticConfig | None = None, check: bool = True) -> list[ScalarGrid]:
    """Ensemble of four-hill fields with side peaks on one hill.

    With ``check`` set, every member must have exactly ``4 + n_side`` leaves
    after simplification at 2 % of its range.
    """
    cfg = config or AnalyticConfig()
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    grids = []
    for i, child in enumerate(root.spawn(cfg.members)):
        rng = np.random.default_rng(child)
        field = _bump_field(cfg.width, cfg.height, analytic_layout(cfg, rng))
        grid = ScalarGrid.from_array(field)
        if check:
            n = len(simplify(split_tree(grid), 0.02).leaves())
            if n != 4 + cfg.n_side:
                raise RuntimeError(f"member {i} has {n} leaves after simplification, "
                                   f"expected {4 + cfg.n_side}")
        grids.append(grid)
    return grids


def _envelope_field(width: int, height: int, bumps) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    out = np.zeros((height, width))
    for x, y, h, s in bumps:
        np.maximum(out, h * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * s * s)), out=out)
    return out


def _phase_layout(phase: int, width: int, height: int, rng: np.random.Generator, leader: int, jitter: float):
    """Bumps of one phase member, meant for the upper-envelope field.

    Hill A is a broad plateau (0.6) with a narrow tall peak and four side
    peaks on the plateau; hill B is a tall bump whose profile crosses the
    plateau near 0.4, below the side saddles near 0.5.  The tall peaks trade
    places with ``leader``.  When B leads, the side branches hang from a
    short A branch instead of the main branch, which moves them far in
    normalized branch coordinates.  Phases differ in the number of low hills
    along the bottom edge.
    """
    s = 0.1 * min(width, height)
    ax, ay = 0.3 * width, 0.35 * height
    tall = [1.03, 0.97] if leader == 0 else [0.97, 1.03]
    bumps = [(ax, ay, 0.6, 1.5 * s),
             (ax, ay, tall[0] + rng.uniform(-0.005, 0.005), 0.5 * s),
             (ax + 2.45 * s, ay, tall[1] + rng.uniform(-0.005, 0.005), 0.8 * s)]
    for a in np.linspace(np.pi * 0.6, np.pi * 1.4, 4):
        bumps.append((ax + s * np.cos(a), ay + s * np.sin(a), 0.65 + rng.uniform(-0.01, 0.01), 0.25 * s))
    n_low = 1 + phase
    for j in range(n_low):
        bumps.append((width * (j + 1) / (n_low + 1), 0.85 * height, 0.3 + rng.uniform(-0.01, 0.01), 0.6 * s))
    return [(x + rng.uniform(-1, 1) * jitter, y + rng.uniform(-1, 1) * jitter, h, sg) for x, y, h, sg in bumps]


def gen_swap_clusters(phases: int = 3, per_phase: int = 4, seed: int = 42, width: int = 96,
                      height: int = 96, jitter: float = 0.5) -> tuple[list[ScalarGrid], list[int]]:
    """Clustered ensemble in which the tallest hill alternates inside every phase.

    Members of one phase share the same layout; within a phase the two tall
    hills trade places between consecutive members, which reshuffles the
    elder-rule branch hierarchy while leaving the merge tree nearly unchanged.
    Returns the grids and their phase labels.
    """
    if phases < 1 or per_phase < 1:
        raise ValueError("phases and per_phase must be positive")
    rng = np.random.default_rng(seed)
    grids, labels = [], []
    for p in range(phases):
        for m in range(per_phase):
            bumps = _phase_layout(p, width, height, rng, m % 2, jitter)
            grids.append(ScalarGrid.from_array(_envelope_field(width, height, bumps)))
            labels.append(p)
    return grids, labels


def gen_geodesic_series(t0: MergeTree, t1: MergeTree, n: int) -> list[MergeTree]:
    """``n`` evenly spaced samples of the path mapping geodesic from ``t0`` to ``t1``."""
    from .interpolation import geodesic, sample

    if n < 2:
        raise ValueError("a series needs at least two frames")
    geo = geodesic(t0, t1)
    return [sample(geo, i / (n - 1)) for i in range(n)]
