"""Finite-window censuses of the drainage graph.

A window is the box ``[1, n]^d`` (vertical coordinate last).  Edges are
computed for every open site of the padded slab
``[1-M, n+M]^(d-1) x [1, n+1]``, where ``M`` is the step-law truncation
radius, so every edge with an endpoint in the window is present except with
probability below ``1e-12`` per site.  ``h`` itself is evaluated on the
unbounded lazy lattice, so targets are exact.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .environment import Environment, h_step_batch, open_batch
from .step_law import ModelParams, StepLaw, moment


def default_margin(params: ModelParams) -> int:
    return StepLaw.build(params).k_max


def _slab_sites(params: ModelParams, n: int, margin: int) -> np.ndarray:
    axes = [np.arange(1 - margin, n + margin + 1)] * params.m + [np.arange(1, n + 2)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)


def drain_slabs(params: ModelParams, n: int, seeds, margin: int | None = None):
    """Edges of the padded slab for each seed; yields ``(sources, targets)``."""
    if n < 1:
        raise ValueError("window side must be >= 1")
    margin = default_margin(params) if margin is None else margin
    base = _slab_sites(params, n, margin)
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    per = len(base)
    chunk = max(1, 400_000 // per)
    for start in range(0, len(seeds), chunk):
        block = seeds[start:start + chunk]
        row_seed = np.repeat(block, per)
        sites = np.tile(base, (len(block), 1))
        is_open = open_batch(params, row_seed, sites)
        src, src_seed = sites[is_open], row_seed[is_open]
        tgt = h_step_batch(params, src_seed, src)
        owner = np.repeat(np.arange(len(block)), per)[is_open]
        cuts = np.searchsorted(owner, np.arange(1, len(block)))
        for s, t in zip(np.split(src, cuts), np.split(tgt, cuts)):
            yield s, t


def _in_box(coords: np.ndarray, n: int) -> np.ndarray:
    return np.all((coords >= 1) & (coords <= n), axis=1)


@dataclass
class ForestWindow:
    """Edges ``u -> h(u)`` of all open sites in the padded slab around ``[1, n]^d``."""

    params: ModelParams
    n: int
    margin: int
    seed: int
    sources: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)

    @cached_property
    def src_in(self) -> np.ndarray:
        return _in_box(self.sources, self.n)

    @cached_property
    def tgt_in(self) -> np.ndarray:
        return _in_box(self.targets, self.n)

    def _linear(self, coords: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple((coords - 1).T), (self.n,) * self.params.d)

    @cached_property
    def open_grid(self) -> np.ndarray:
        """Boolean grid over the window, axes in coordinate order (level last)."""
        g = np.zeros(self.n ** self.params.d, dtype=bool)
        g[self._linear(self.sources[self.src_in])] = True
        return g.reshape((self.n,) * self.params.d)

    @cached_property
    def indegree_grid(self) -> np.ndarray:
        idx = self._linear(self.targets[self.tgt_in])
        return np.bincount(idx, minlength=self.n ** self.params.d).reshape((self.n,) * self.params.d)

    @property
    def window_sites(self) -> np.ndarray:
        return self.sources[self.src_in]

    @cached_property
    def degrees(self) -> np.ndarray:
        """Total degree of every open window vertex, aligned with :attr:`window_sites`."""
        return 1 + self.indegree_grid.ravel()[self._linear(self.window_sites)]

    @property
    def open_count(self) -> int:
        return int(self.src_in.sum())

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """L1 length of every slab edge (horizontal offset plus the vertical unit)."""
        return np.abs(self.targets[:, :-1] - self.sources[:, :-1]).sum(axis=1) + 1

    @property
    def touches_window(self) -> np.ndarray:
        return self.src_in | self.tgt_in

    def degree_histogram(self) -> np.ndarray:
        return np.bincount(self.degrees, minlength=2)

    def edge_length_histogram(self) -> np.ndarray:
        return np.bincount(self.edge_lengths[self.touches_window], minlength=2)

    def up_offset_counts(self, offset: int) -> np.ndarray:
        """Per open window vertex, the number of up-edges at horizontal L1 offset ``offset``."""
        sel = self.tgt_in & (self.edge_lengths == offset + 1)
        idx = self._linear(self.targets[sel])
        counts = np.bincount(idx, minlength=self.n ** self.params.d)
        return counts[self._linear(self.window_sites)]

    def indicator_field(self, nu: int) -> np.ndarray:
        """``Y`` grid: 1 where the site is open with degree ``nu + 1``."""
        return self.open_grid & (self.indegree_grid == nu)

    def summary(self) -> dict:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.sources).tobytes())
        h.update(np.ascontiguousarray(self.targets).tobytes())
        return {
            "d": self.params.d,
            "p": self.params.p,
            "n": self.n,
            "margin": self.margin,
            "seed": self.seed,
            "open_vertices": self.open_count,
            "slab_edges": int(len(self.sources)),
            "degree_histogram": self.degree_histogram().tolist(),
            "edge_length_histogram": self.edge_length_histogram().tolist(),
            "mean_degree": float(self.degrees.mean()) if self.open_count else None,
            "digest": h.hexdigest(),
        }


def simulate_window(params: ModelParams, n: int, seed: int, margin: int | None = None) -> ForestWindow:
    margin = default_margin(params) if margin is None else margin
    src, tgt = next(drain_slabs(params, n, [seed], margin))
    return ForestWindow(params, n, margin, int(seed), src, tgt)


def degree_count(window: ForestWindow, nu: int) -> int:
    """Open window vertices of degree ``nu + 1``."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    return int((window.degrees == nu + 1).sum())


def edge_length_count(window: ForestWindow, l: int) -> int:
    """Edges of L1 length ``l`` with at least one endpoint in the window."""
    if l < 1:
        raise ValueError("l must be >= 1")
    return int(((window.edge_lengths == l) & window.touches_window).sum())


def _unique_rows(a: np.ndarray) -> np.ndarray:
    return np.unique(a, axis=0) if len(a) else a


def _descend(env: Environment, sites: np.ndarray, steps: int) -> np.ndarray:
    """Distinct images of ``sites`` after ``steps`` applications of ``h``."""
    cur = _unique_rows(sites)
    for _ in range(steps):
        if not len(cur):
            break
        cur = _unique_rows(env.h_step(cur))
    return cur


def top_row(window: ForestWindow) -> np.ndarray:
    s = window.window_sites
    return s[s[:, -1] == window.n]


def tree_count(window: ForestWindow, depth: int) -> int:
    """Distinct ``h^depth`` images of the open top-row vertices of the window."""
    if not 0 <= depth <= window.n:
        raise ValueError("depth must lie in 0..n")
    env = Environment(window.params, window.seed)
    return int(len(_descend(env, top_row(window), depth)))


def component_labels(window: ForestWindow, depth: int) -> np.ndarray:
    """Label of each top-row vertex: index of its ``h^depth`` image among the distinct images."""
    env = Environment(window.params, window.seed)
    pts = top_row(window)
    cur = pts
    for _ in range(depth):
        cur = env.h_step(cur) if len(cur) else cur
    if not len(cur):
        return np.zeros(0, dtype=np.int64)
    _, labels = np.unique(cur, axis=0, return_inverse=True)
    return labels.ravel()


# ----------------------------------------------------------------- ancestors


def _level_sites(m: int, level: int, lo: int, hi: int) -> np.ndarray:
    axes = [np.arange(lo, hi + 1)] * m
    grid = np.meshgrid(*axes, indexing="ij")
    cols = [g.ravel() for g in grid] + [np.full(grid[0].size, level)]
    return np.stack(cols, axis=1).astype(np.int64)


def _open_level(env: Environment, m: int, level: int, lo: int, hi: int) -> np.ndarray:
    sites = _level_sites(m, level, lo, hi)
    return sites[env.is_open(sites)]


def _default_pad(params: ModelParams, order: int) -> int:
    sigma = math.sqrt(moment(params, 2))
    return int(math.ceil(6.0 * sigma * math.sqrt(order))) + default_margin(params)


def ancestor_images(env: Environment, level: int, order: int, half_width: int, pad: int | None = None):
    """Sites of ``M_level^(order)`` inside the window ``[-W, W]^(d-1)``.

    Returns ``(points, exact)``.  In ``d = 2`` paths cannot cross, so the
    source row is widened until the images of its two end sites bracket the
    window; the result is then exact.  In higher dimensions a fixed pad of six
    path standard deviations is used and ``exact`` is ``False``.
    """
    params = env.params
    m, W = params.m, half_width
    if order == 0:
        return _open_level(env, m, level, -W, W), True
    pad = _default_pad(params, order) if pad is None else pad
    while True:
        top = _open_level(env, m, level + order, -W - pad, W + pad)
        imgs = _descend(env, top, order)
        if m > 1:
            inside = np.all(np.abs(imgs[:, :-1]) <= W, axis=1)
            return imgs[inside], False
        if len(imgs) and imgs[:, 0].min() <= -W and imgs[:, 0].max() >= W:
            inside = np.abs(imgs[:, 0]) <= W
            return imgs[inside], True
        pad *= 2


@dataclass(frozen=True)
class AncestorCensus:
    """Counts of window vertices at ``level`` having ancestors ``n`` levels up, per order ``n``."""

    params: ModelParams
    level: int
    half_width: int
    orders: tuple
    counts: tuple
    sites: int
    exact: bool

    @property
    def densities(self) -> tuple:
        return tuple(c / self.sites for c in self.counts)


def ancestor_census(params: ModelParams, t: int, orders, half_width: int, seed: int) -> AncestorCensus:
    orders = tuple(sorted(int(n) for n in orders))
    if orders and orders[0] < 0:
        raise ValueError("orders must be nonnegative")
    env = Environment(params, seed)
    counts, exact = [], True
    for n in orders:
        pts, ok = ancestor_images(env, t, n, half_width)
        counts.append(len(pts))
        exact &= ok
    return AncestorCensus(params, t, half_width, orders, tuple(counts), (2 * half_width + 1) ** params.m, exact)


@dataclass(frozen=True)
class BranchingStats:
    """Counts on ``[-W, W]`` for the finite-order proxy of the infinite-ancestry sets.

    ``r0``: level-0 vertices with an ancestor at level ``n``; ``r1``: level-1
    vertices with an ancestor at level ``n``; ``r0_branching``: level-0 proxy
    vertices with at least two children in the level-1 proxy set.
    ``r1_shifted`` counts level-1 vertices with an ancestor at level ``n + 1``,
    which has the same law as ``r0`` by vertical stationarity.
    """

    order: int
    half_width: int
    r0: int
    r1: int
    r0_branching: int
    r1_shifted: int

    @property
    def inequality_holds(self) -> bool:
        return self.r1 - (self.r0 - 2) >= self.r0_branching - 2


def branching_stats(params: ModelParams, order: int, half_width: int, seed: int) -> BranchingStats:
    """Branching-point counts for one environment (``d = 2`` only)."""
    if params.d != 2:
        raise ValueError("branching statistics are implemented for d = 2")
    if order < 2:
        raise ValueError("order must be >= 2")
    env = Environment(params, seed)
    W = half_width
    pad = _default_pad(params, order)
    while True:
        top = _open_level(env, 1, order, -W - pad, W + pad)
        lvl1 = _descend(env, top, order - 1)
        lvl0_all = env.h_step(lvl1) if len(lvl1) else lvl1
        if len(lvl0_all) and lvl0_all[:, 0].min() <= -W and lvl0_all[:, 0].max() >= W \
                and lvl1[:, 0].min() <= -W and lvl1[:, 0].max() >= W:
            break
        pad *= 2
    parents, n_children = np.unique(lvl0_all[:, 0], return_counts=True)
    in0 = np.abs(parents) <= W
    r0 = int(in0.sum())
    r0_2 = int((in0 & (n_children >= 2)).sum())
    r1 = int((np.abs(lvl1[:, 0]) <= W).sum())
    shifted, _ = ancestor_images(env, 1, order, W)
    return BranchingStats(order, W, r0, r1, r0_2, len(shifted))
