"""Lazy realization of the site configuration and the drainage map ``h``.

Sites are rows of integers with the vertical coordinate last.  Openness of a
site and the tie-break uniform of an ordered pair ``(u, v)`` are hashed from
the environment seed, so nothing is stored and any region of the unbounded
lattice can be queried in any order.

The ``*_batch`` functions take one seed per row; they are what the Monte
Carlo drivers use to advance many independent replicas in lock-step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import SearchExhausted
from .step_law import ModelParams, shell_points, truncation_radius

SEARCH_TOLERANCE = 1e-15


def default_search_radius(params: ModelParams) -> int:
    """Smallest ``k`` with ``(1-p)^#D_{k-1} < 1e-15``."""
    return truncation_radius(params.m, params.p, SEARCH_TOLERANCE)


def _as_rows(sites, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(sites, dtype=np.int64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != d:
        raise ValueError(f"sites must have {d} coordinates, got shape {arr.shape}")
    return arr, single


def _row_keys(seeds, label: int, n: int) -> np.ndarray:
    keys = rng.key_array(seeds, label)
    if keys.shape[0] == 1:
        return np.broadcast_to(keys, (n,))
    if keys.shape[0] != n:
        raise ValueError("need one seed per row")
    return keys


def open_batch(params: ModelParams, seeds, sites: np.ndarray) -> np.ndarray:
    """Openness of each site row under its row seed."""
    sites = np.asarray(sites, dtype=np.int64)
    keys = _row_keys(seeds, rng.OPEN, sites.shape[0])
    return rng.uniforms(keys, sites) <= params.p


def h_step_batch(params: ModelParams, seeds, sites: np.ndarray, r_max: int | None = None) -> np.ndarray:
    """Apply ``h`` to every row of ``sites`` (shape ``(N, d)``).

    Shells ``k = 0, 1, ...`` around the vertical projection are scanned until
    an open site appears; among several open sites at the minimal distance the
    one with the smallest pair uniform wins.
    """
    d, m, p = params.d, params.m, params.p
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, d)
    n = sites.shape[0]
    if r_max is None:
        r_max = default_search_radius(params)
    ko = _row_keys(seeds, rng.OPEN, n)
    kt = _row_keys(seeds, rng.TIE, n)
    out = np.empty_like(sites)
    active = np.arange(n)
    for k in range(r_max + 1):
        shell = shell_points(m, k)
        src = sites[active]
        cand = np.empty((len(active), len(shell), d), dtype=np.int64)
        cand[..., :m] = src[:, None, :m] + shell[None]
        cand[..., m] = (src[:, m] - 1)[:, None]
        is_open = rng.uniforms(ko[active][:, None], cand) <= p
        n_open = is_open.sum(axis=1)
        found = n_open > 0
        if found.any():
            choice = np.argmax(is_open, axis=1)
            multi = np.flatnonzero(n_open > 1)
            if len(multi):
                pair = np.empty((len(multi), len(shell), d + m), dtype=np.int64)
                pair[..., :d] = src[multi][:, None, :]
                pair[..., d:] = cand[multi][..., :m]
                tie = rng.uniforms(kt[active[multi]][:, None], pair)
                tie[~is_open[multi]] = np.inf
                choice[multi] = np.argmin(tie, axis=1)
            rows = np.flatnonzero(found)
            out[active[rows]] = cand[rows, choice[rows]]
            active = active[~found]
            if not len(active):
                return out
    raise SearchExhausted(f"{len(active)} site(s) found no open site within {r_max} shells")


def paths_batch(params: ModelParams, seeds, starts: np.ndarray, n: int, r_max: int | None = None) -> np.ndarray:
    """Positions ``h^0..h^n`` of every start row; shape ``(n + 1, N, d)``."""
    cur = np.asarray(starts, dtype=np.int64).reshape(-1, params.d)
    out = np.empty((n + 1,) + cur.shape, dtype=np.int64)
    out[0] = cur
    for i in range(1, n + 1):
        cur = h_step_batch(params, seeds, cur, r_max)
        out[i] = cur
    return out


@dataclass(frozen=True)
class PathTrace:
    """Sites ``h^0(u), ..., h^n(u)`` of one drainage path."""

    steps: np.ndarray

    @property
    def origin(self) -> np.ndarray:
        return self.steps[0]

    @property
    def horizontal(self) -> np.ndarray:
        return self.steps[:, :-1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.horizontal, axis=0)

    def __len__(self) -> int:
        return len(self.steps)


class Environment:
    """One realization of the lattice, keyed by ``seed``.

    Queries are deterministic functions of ``(seed, site)``; no memo is kept.
    """

    def __init__(self, params: ModelParams, seed: int, r_max: int | None = None):
        self.params = params
        self.seed = int(seed) & ((1 << 64) - 1)
        self.r_max = default_search_radius(params) if r_max is None else int(r_max)

    def __repr__(self):
        return f"Environment(d={self.params.d}, p={self.params.p}, seed={self.seed})"

    def is_open(self, sites):
        rows, single = _as_rows(sites, self.params.d)
        res = open_batch(self.params, self.seed, rows)
        return bool(res[0]) if single else res

    def tie_break(self, src, dst):
        """Uniform on (0, 1] attached to the ordered pair ``(src, dst)``."""
        d = self.params.d
        s, single_s = _as_rows(src, d)
        t, single_t = _as_rows(dst, d)
        single = single_s and single_t
        s, t = np.broadcast_arrays(s, t)
        if np.any(t[:, -1] != s[:, -1] - 1):
            raise ValueError("tie-break pairs must go down exactly one level")
        keys = _row_keys(self.seed, rng.TIE, len(s))
        vals = rng.uniforms(keys, np.concatenate([s, t[:, :-1]], axis=1))
        return float(vals[0]) if single else vals

    def h_step(self, sites):
        rows, single = _as_rows(sites, self.params.d)
        res = h_step_batch(self.params, self.seed, rows, self.r_max)
        return res[0] if single else res

    def path(self, u, n: int) -> PathTrace:
        if n < 0:
            raise ValueError("n must be nonnegative")
        rows, _ = _as_rows(u, self.params.d)
        if rows.shape[0] != 1:
            raise ValueError("path takes a single start site")
        steps = paths_batch(self.params, self.seed, rows, n, self.r_max)[:, 0, :]
        return PathTrace(steps)
