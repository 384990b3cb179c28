"""Coupling of two drainage paths with two independent random walks.

Four independent uniform fields on the horizontal lattice drive one step:
``U1u``/``U2u`` (openness and tie-breaks seen from ``u``) and ``U1v``/``U2v``
(the same from ``v``).

* ``phi``: nearest ``U1u``-open site to ``u`` (radius ``k_u``), ties by ``U2u``.
* ``zeta``: nearest ``U1v``-open site to ``v`` (radius ``l_v``), ties by ``U2v``.
* ``psi``: nearest open site to ``v`` where openness is read from ``U1u``
  inside ``u``'s searched diamond and from ``U1v`` elsewhere (radius
  ``m_v``), ties by ``U2v``.

``(phi, zeta)`` are independent steps; ``(phi, psi)`` is the true joint step
of two drainage paths.  When the diamonds ``u + D(k_u)`` and ``v + D(m_v)``
are disjoint, ``zeta = psi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import BudgetExceeded, SearchExhausted
from .environment import default_search_radius, h_step_batch
from .rng import derive_seeds
from .step_law import ModelParams, StepLaw, diamond_size, shell_points

MAX_WALK_STEPS = 2 * 10 ** 8


def _search(centers, field_open, tie_keys, step, r_max):
    """Nearest open site to each centre; returns ``(radius, site)``."""
    R, m = centers.shape
    radius = np.full(R, -1, dtype=np.int64)
    site = np.empty_like(centers)
    active = np.arange(R)
    for k in range(r_max + 1):
        shell = shell_points(m, k)
        cand = centers[active][:, None, :] + shell[None]
        is_open = field_open(active, cand)
        n_open = is_open.sum(axis=1)
        found = n_open > 0
        if found.any():
            choice = np.argmax(is_open, axis=1)
            multi = np.flatnonzero(n_open > 1)
            if len(multi):
                rows = active[multi]
                coords = np.concatenate(
                    [np.broadcast_to(step[rows][:, None, None], (len(multi), len(shell), 1)), cand[multi]], axis=2)
                tie = rng.uniforms(tie_keys[rows][:, None], coords)
                tie[~is_open[multi]] = np.inf
                choice[multi] = np.argmin(tie, axis=1)
            hit = np.flatnonzero(found)
            radius[active[hit]] = k
            site[active[hit]] = cand[hit, choice[hit]]
            active = active[~found]
            if not len(active):
                return radius, site
    raise SearchExhausted(f"coupling search exhausted {r_max} shells")


def _field(keys, step, p):
    def is_open(rows, cand):
        coords = np.concatenate(
            [np.broadcast_to(step[rows][:, None, None], cand.shape[:2] + (1,)), cand], axis=2)
        return rng.uniforms(keys[rows][:, None], coords) <= p
    return is_open


@dataclass(frozen=True)
class CouplingStep:
    """One coupled step for a batch of replicas (arrays over replicas)."""

    u: np.ndarray
    v: np.ndarray
    k_u: np.ndarray
    l_v: np.ndarray
    m_v: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray
    diamonds_disjoint: np.ndarray

    @property
    def decoupled(self) -> np.ndarray:
        return np.any(self.zeta != self.psi, axis=1)


def coupling_step_batch(params: ModelParams, seeds, u, v, step=0, v_walk=None, r_max: int | None = None) -> CouplingStep:
    """Coupled step from horizontal positions ``u`` and ``v`` (shape ``(R, d-1)``).

    ``v_walk`` is where the independent walk from ``v`` currently sits; it
    defaults to ``v`` (the two agree until the first decoupling).
    """
    p, m = params.p, params.m
    u = np.asarray(u, dtype=np.int64).reshape(-1, m)
    v = np.asarray(v, dtype=np.int64).reshape(-1, m)
    v_walk = v if v_walk is None else np.asarray(v_walk, dtype=np.int64).reshape(-1, m)
    R = len(u)
    seeds = np.broadcast_to(np.atleast_1d(np.asarray(seeds, dtype=np.uint64)), (R,))
    step = np.broadcast_to(np.asarray(step, dtype=np.int64), (R,))
    r_max = default_search_radius(params) if r_max is None else r_max
    k1u = rng.key_array(seeds, rng.COUPLE_OPEN_U)
    k2u = rng.key_array(seeds, rng.COUPLE_TIE_U)
    k1v = rng.key_array(seeds, rng.COUPLE_OPEN_V)
    k2v = rng.key_array(seeds, rng.COUPLE_TIE_V)
    open_u = _field(k1u, step, p)
    open_v = _field(k1v, step, p)

    k_u, phi = _search(u, open_u, k2u, step, r_max)
    l_v, zeta = _search(v_walk, open_v, k2v, step, r_max)

    def open_mixed(rows, cand):
        inside = np.abs(cand - u[rows][:, None, :]).sum(axis=2) <= k_u[rows][:, None]
        return np.where(inside, open_u(rows, cand), open_v(rows, cand))

    m_v, psi = _search(v, open_mixed, k2v, step, r_max)
    disjoint = np.abs(u - v).sum(axis=1) > k_u + m_v
    return CouplingStep(u, v, k_u, l_v, m_v, phi, zeta, psi, disjoint)


def coupling_step(params: ModelParams, u, v, seed: int, step: int = 0) -> CouplingStep:
    return coupling_step_batch(params, [seed], np.atleast_2d(u), np.atleast_2d(v), step)


@dataclass(frozen=True)
class CouplingRun:
    """Trajectories of coupled runs, arrays of shape ``(steps + 1, R, d-1)``.

    ``tree_u`` doubles as the walk from ``u``; ``walk_v`` is the independent
    walk from ``v`` and ``tree_v`` the drainage path from ``v``.
    ``first_decoupling`` is the first step where they differ (``-1``: never).
    ``violations`` counts coupled steps with disjoint diamonds but
    ``zeta != psi``.
    """

    tree_u: np.ndarray
    walk_v: np.ndarray
    tree_v: np.ndarray
    k_u: np.ndarray
    m_v: np.ndarray
    disjoint: np.ndarray
    first_decoupling: np.ndarray
    violations: int

    @property
    def walk_increments(self) -> np.ndarray:
        return np.diff(self.walk_v, axis=0)


def coupling_runs(params: ModelParams, u, v, steps: int, seeds) -> CouplingRun:
    """Iterate the coupled step ``steps`` times for every seed; step ``n`` uses fresh fields."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    R, m = len(seeds), params.m
    tu = np.zeros((steps + 1, R, m), dtype=np.int64)
    tu[0] = np.asarray(u, dtype=np.int64).reshape(-1, m)
    wv = np.zeros_like(tu)
    wv[0] = np.asarray(v, dtype=np.int64).reshape(-1, m)
    tv = wv.copy()
    ku = np.zeros((steps, R), dtype=np.int64)
    mv = np.zeros_like(ku)
    dis = np.zeros((steps, R), dtype=bool)
    first = np.full(R, -1, dtype=np.int64)
    violations = 0
    for n in range(steps):
        cs = coupling_step_batch(params, seeds, tu[n], tv[n], n, wv[n])
        tu[n + 1], wv[n + 1], tv[n + 1] = cs.phi, cs.zeta, cs.psi
        ku[n], mv[n], dis[n] = cs.k_u, cs.m_v, cs.diamonds_disjoint
        coupled = first < 0
        split = cs.decoupled
        violations += int((coupled & cs.diamonds_disjoint & (split | (cs.l_v != cs.m_v))).sum())
        first[coupled & split] = n + 1
    return CouplingRun(tu, wv, tv, ku, mv, dis, first, violations)


def coupling_run(params: ModelParams, u, v, steps: int, seed: int) -> CouplingRun:
    return coupling_runs(params, np.atleast_2d(u), np.atleast_2d(v), steps, [seed])


def floor_radius_decoupling_bound(params: ModelParams, separation: int) -> float:
    """``2 (1-p)^#D(k0)`` with ``k0 = floor(|u - v|_1 / 2)``."""
    k0 = separation // 2
    return 2.0 * (1.0 - params.p) ** diamond_size(params.m, k0)


def decoupling_bound(params: ModelParams, separation: int) -> float:
    """``2 (1-p)^#D(ceil(s/2) - 1)``: failure needs ``k_u + m_v >= s``."""
    r = (separation + 1) // 2 - 1
    return 2.0 * (1.0 - params.p) ** diamond_size(params.m, r)


@dataclass(frozen=True)
class DecouplingEstimate:
    separation: tuple
    estimate: float
    se: float
    bound: float
    corrected_bound: float
    replicas: int
    violations: int  # disjoint diamonds but zeta != psi


def _as_vector(params: ModelParams, separation) -> np.ndarray:
    sep = np.asarray(separation, dtype=np.int64)
    if sep.ndim == 0:
        vec = np.zeros(params.m, dtype=np.int64)
        vec[0] = sep
        return vec
    return sep.reshape(params.m)


def decoupling_probability(params: ModelParams, separation, replicas: int, seed: int) -> DecouplingEstimate:
    """Monte Carlo ``P(zeta != psi)`` for one step from ``u = 0``, ``v = separation``."""
    v = _as_vector(params, separation)
    s = int(np.abs(v).sum())
    if s < 1:
        raise ValueError("separation must be >= 1")
    seeds = derive_seeds(seed, replicas)
    u = np.zeros((replicas, params.m), dtype=np.int64)
    cs = coupling_step_batch(params, seeds, u, np.broadcast_to(v, (replicas, params.m)))
    bad = cs.decoupled
    est = float(bad.mean())
    return DecouplingEstimate(tuple(int(c) for c in v), est, math.sqrt(est * (1 - est) / replicas),
                              floor_radius_decoupling_bound(params, s), decoupling_bound(params, s),
                              replicas, int((bad & cs.diamonds_disjoint).sum()))


# ------------------------------------------------------ independent-walk events


def default_K(p: float) -> int:
    """Smallest integer ``K`` with ``(1/2)|log(1-p)| K^3 > 4``."""
    c2 = 0.5 * abs(math.log1p(-p))
    K = max(1, int(math.floor((4.0 / c2) ** (1.0 / 3.0))))
    while c2 * K ** 3 <= 4.0:
        K += 1
    return K


def default_start(params: ModelParams, n: int, epsilon: float) -> np.ndarray:
    """Start separation ``floor(n^(1+eps)) e_1``."""
    v = np.zeros(params.m, dtype=np.int64)
    v[0] = max(1, int(math.floor(n ** (1 + epsilon))))
    return v


@dataclass(frozen=True)
class EventEstimate:
    event: str
    n: int
    epsilon: float
    K: float
    start: tuple
    estimate: float
    se: float
    replicas: int


def _check_event_args(n: int, epsilon: float, replicas: int, work: int) -> None:
    if not 0 < epsilon < 1 / 3:
        raise ValueError("epsilon must lie in (0, 1/3)")
    if n < 2:
        raise ValueError("n must be >= 2")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if work > MAX_WALK_STEPS:
        raise BudgetExceeded(f"{work} walk steps exceed the budget of {MAX_WALK_STEPS}")


def independent_walk_distances(params: ModelParams, start, steps: int, replicas: int, seed: int):
    """L1 distances ``|v + sum (X_j - Y_j)|`` for two independent step-law walks.

    Returns ``(min_distance_over_steps_1..steps, final_distance)`` per replica.
    """
    law = StepLaw.build(params)
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2 ** 63 - 1), steps])))
    start = np.asarray(start, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(steps, 1))
    mins, finals = [], []
    for lo in range(0, replicas, chunk):
        r = min(chunk, replicas - lo)
        x = law.sample(gen, r * steps).reshape(r, steps, params.m)
        y = law.sample(gen, r * steps).reshape(r, steps, params.m)
        pos = start + np.cumsum(x - y, axis=1)
        dist = np.abs(pos).sum(axis=2)
        mins.append(dist.min(axis=1))
        finals.append(dist[:, -1])
    return np.concatenate(mins), np.concatenate(finals)


def event_probability(params: ModelParams, n: int, epsilon: float, event: str, replicas: int, seed: int,
                      start=None, K: float | None = None) -> EventEstimate:
    """Probability of one of the events ``B, E, F, G`` for independent walks over ``n^4`` steps.

    * ``E``: the walks come within ``K log n`` (L1) at some step.
    * ``F``: final separation exceeds ``n^(2(1+eps))``.
    * ``G``: final separation is at most ``n^(2(1-eps))``.
    * ``B``: none of the above and the separation stays at least ``K log n``.
    """
    event = event.upper()
    if event not in {"B", "E", "F", "G"}:
        raise ValueError(f"unknown event {event!r}")
    steps = n ** 4
    _check_event_args(n, epsilon, replicas, 2 * steps * replicas)
    K = default_K(params.p) if K is None else K
    v = default_start(params, n, epsilon) if start is None else _as_vector(params, start)
    mins, finals = independent_walk_distances(params, v, steps, replicas, seed)
    near = K * math.log(n)
    outer, inner = n ** (2 * (1 + epsilon)), n ** (2 * (1 - epsilon))
    e = mins <= near
    f = finals > outer
    g = finals <= inner
    hit = {"E": e, "F": f, "G": g, "B": ~f & ~g & (mins >= near)}[event]
    est = float(hit.mean())
    return EventEstimate(event, n, epsilon, K, tuple(int(c) for c in v), est,
                         math.sqrt(est * (1 - est) / replicas), replicas)


# ------------------------------------------------------------ many tree paths


def default_starts(params: ModelParams, k: int, n: int, epsilon: float) -> np.ndarray:
    """``k`` horizontal starts with pairwise L1 distances in ``[n^(1-eps), n^(1+eps)]``.

    Candidates in the diamond of radius ``n^(1+eps)`` are taken greedily in
    lexicographic order of ``(|z|_1, z)`` starting from the origin.
    """
    lo, hi = n ** (1 - epsilon), n ** (1 + epsilon)
    r = int(math.floor(hi))
    cand = np.concatenate([shell_points(params.m, j) for j in range(r + 1)])
    chosen = [cand[0]]
    for z in cand[1:]:
        if len(chosen) == k:
            break
        dist = np.abs(np.asarray(chosen) - z).sum(axis=1)
        if np.all((dist >= lo) & (dist <= hi)):
            chosen.append(z)
    if len(chosen) < k:
        raise ValueError(f"cannot place {k} starts with separations in [{lo:.2f}, {hi:.2f}]")
    return np.stack(chosen).astype(np.int64)


@dataclass(frozen=True)
class EscapeEstimate:
    k: int
    n: int
    epsilon: float
    starts: np.ndarray
    estimate: float
    se: float
    replicas: int


def multi_path_escape(params: ModelParams, k: int, n: int, epsilon: float, replicas: int, seed: int,
                      starts=None) -> EscapeEstimate:
    """Probability that ``k`` drainage paths in one environment stay pairwise distinct for ``n^4`` steps."""
    if k < 2:
        raise ValueError("k must be >= 2")
    steps = n ** 4
    _check_event_args(n, epsilon, replicas, k * steps * replicas)
    starts = default_starts(params, k, n, epsilon) if starts is None else np.asarray(starts, dtype=np.int64)
    if starts.shape != (k, params.m):
        raise ValueError(f"starts must have shape ({k}, {params.m})")
    seeds = derive_seeds(seed, replicas)
    r_max = default_search_radius(params)
    pos = np.zeros((replicas, k, params.d), dtype=np.int64)
    pos[:, :, :-1] = starts
    row_seeds = np.repeat(seeds, k)
    alive = np.ones(replicas, dtype=bool)
    for _ in range(steps):
        idx = np.flatnonzero(alive)
        if not len(idx):
            break
        flat = pos[idx].reshape(-1, params.d)
        nxt = h_step_batch(params, np.repeat(seeds[idx], k), flat, r_max).reshape(len(idx), k, params.d)
        pos[idx] = nxt
        srt = np.sort(nxt[:, :, 0], axis=1) if params.m == 1 else None
        if params.m == 1:
            distinct = np.all(np.diff(srt, axis=1) != 0, axis=1)
        else:
            distinct = np.array([len(np.unique(r, axis=0)) == k for r in nxt])
        alive[idx[~distinct]] = False
    est = float(alive.mean())
    return EscapeEstimate(k, n, epsilon, starts, est, math.sqrt(est * (1 - est) / replicas), replicas)
