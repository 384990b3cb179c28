"""Two drainage paths in one environment and their horizontal difference.

``Z_n = X_u^n - X_v^n`` is a Markov chain absorbed at the origin when the
paths coalesce.  Monte Carlo drivers advance one pair per replica; replica
``i`` lives in the environment seeded by ``derive_seed(seed, i)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment, PathTrace, default_search_radius, h_step_batch
from .rng import derive_seeds
from .step_law import ModelParams, StepLaw, _shell_power_sum, moment


@dataclass(frozen=True)
class JointTrace:
    trace_u: PathTrace
    trace_v: PathTrace
    meeting_time: int | None  # None: not met by the horizon

    @property
    def differences(self) -> np.ndarray:
        return self.trace_u.horizontal - self.trace_v.horizontal

    @property
    def horizon(self) -> int:
        return len(self.trace_u) - 1


def simulate_pair(params: ModelParams, u, v, horizon: int, seed: int) -> JointTrace:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.shape != (params.d,) or v.shape != (params.d,):
        raise ValueError(f"start sites must have {params.d} coordinates")
    if u[-1] != v[-1]:
        raise ValueError("start sites must lie on the same level")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    env = Environment(params, seed)
    tu = np.empty((horizon + 1, params.d), dtype=np.int64)
    tv = np.empty_like(tu)
    tu[0], tv[0] = u, v
    met = 0 if np.array_equal(u, v) else None
    for n in range(1, horizon + 1):
        if met is None:
            both = env.h_step(np.stack([tu[n - 1], tv[n - 1]]))
            tu[n], tv[n] = both
            if np.array_equal(tu[n], tv[n]):
                met = n
        else:
            tu[n] = tv[n] = env.h_step(tu[n - 1])
    return JointTrace(PathTrace(tu), PathTrace(tv), met)


def _start_pairs(params: ModelParams, z0, replicas: int):
    z0 = np.broadcast_to(np.asarray(z0, dtype=np.int64).reshape(-1, params.m), (replicas, params.m))
    u = np.zeros((replicas, params.d), dtype=np.int64)
    v = np.zeros((replicas, params.d), dtype=np.int64)
    u[:, :-1] = z0
    return u, v


def run_pairs(params: ModelParams, z0, horizon: int, replicas: int, seed: int, checkpoints=()):
    """Advance ``replicas`` independent pairs with initial difference ``z0``.

    Returns ``(meeting_times, snapshots, min_first)``: meeting time per
    replica (``-1`` if not met), the differences ``Z_n`` at each checkpoint
    (absorbed replicas hold 0), and per replica the running minimum of the
    first coordinate of ``Z`` (the d = 2 sign check).
    """
    seeds = derive_seeds(seed, replicas)
    r_max = default_search_radius(params)
    u, v = _start_pairs(params, z0, replicas)
    diff = u[:, :-1] - v[:, :-1]
    meet = np.where(np.all(diff == 0, axis=1), 0, -1)
    min_first = diff[:, 0].copy()
    checkpoints = sorted(set(int(c) for c in checkpoints))
    snaps = {}
    if 0 in checkpoints:
        snaps[0] = diff.copy()
    active = np.flatnonzero(meet < 0)
    for n in range(1, horizon + 1):
        if len(active):
            pts = np.concatenate([u[active], v[active]])
            s = seeds[active]
            nxt = h_step_batch(params, np.concatenate([s, s]), pts, r_max)
            k = len(active)
            u[active], v[active] = nxt[:k], nxt[k:]
            d_act = u[active, :-1] - v[active, :-1]
            diff[active] = d_act
            np.minimum.at(min_first, active, d_act[:, 0])
            met = np.all(d_act == 0, axis=1)
            meet[active[met]] = n
            active = active[~met]
        if n in checkpoints:
            snaps[n] = diff.copy()
        if not len(active) and n >= (checkpoints[-1] if checkpoints else 0):
            break
    for c in checkpoints:
        snaps.setdefault(c, diff.copy())
    return meet, snaps, min_first


@dataclass(frozen=True)
class MeetingEstimate:
    fraction: float
    se: float
    replicas: int
    horizon: int
    meeting_times: np.ndarray

    def fraction_by(self, horizon: int) -> float:
        """Meeting fraction at a shorter horizon, reusing the same replicas."""
        t = self.meeting_times
        return float(np.mean((t >= 0) & (t <= horizon)))


def meeting_probability(params: ModelParams, separation, horizon: int, replicas: int, seed: int) -> MeetingEstimate:
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    meet, _, _ = run_pairs(params, separation, horizon, replicas, seed)
    f = float(np.mean(meet >= 0))
    return MeetingEstimate(f, float(np.sqrt(f * (1 - f) / replicas)), replicas, horizon, meet)


@dataclass(frozen=True)
class MartingaleCheck:
    z0: int
    checkpoints: tuple
    means: tuple
    ses: tuple
    negative_replicas: int
    replicas: int


def martingale_check(params: ModelParams, z0: int, checkpoints, replicas: int, seed: int) -> MartingaleCheck:
    """Sample mean of ``Z_n`` at each checkpoint for ``d = 2``; theory says it stays ``z0``."""
    if params.d != 2:
        raise ValueError("the martingale check applies to d = 2")
    if z0 < 0:
        raise ValueError("z0 must be nonnegative")
    cps = tuple(sorted(set(int(c) for c in checkpoints)))
    _, snaps, min_first = run_pairs(params, z0, max(cps), replicas, seed, cps)
    means, ses = [], []
    for c in cps:
        z = snaps[c][:, 0].astype(np.float64)
        means.append(float(z.mean()))
        ses.append(float(z.std(ddof=1) / np.sqrt(len(z))) if len(z) > 1 else 0.0)
    return MartingaleCheck(z0, cps, tuple(means), tuple(ses), int((min_first < 0).sum()), replicas)


@dataclass(frozen=True)
class DriftEstimate:
    separation: tuple
    order: int
    mean: float
    se: float
    replicas: int


def one_step_increments(params: ModelParams, x, replicas: int, seed: int, independent: bool = False):
    """Displacements ``(A, B)`` of paths started at ``x`` and at the origin.

    With ``independent=True`` the two steps are taken in unrelated
    environments, which removes the interaction between nearby walkers.
    """
    x = np.asarray(x, dtype=np.int64).reshape(params.m)
    u = np.zeros((replicas, params.d), dtype=np.int64)
    u[:, :-1] = x
    v = np.zeros((replicas, params.d), dtype=np.int64)
    seeds = derive_seeds(seed, replicas)
    if independent:
        seeds_v = derive_seeds(seed ^ 0x5DEECE66D, replicas)
    else:
        seeds_v = seeds
    nxt = h_step_batch(params, np.concatenate([seeds, seeds_v]), np.concatenate([u, v]))
    a = nxt[:replicas, :-1] - x
    b = nxt[replicas:, :-1]
    return a, b


def drift_moment(params: ModelParams, x, order: int, replicas: int, seed: int, independent: bool = False) -> DriftEstimate:
    """Estimate ``E[(|x + A - B|^2 - |x|^2)^order]`` for one shared-environment step."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x, dtype=np.int64).reshape(params.m)
    if not x.any():
        raise ValueError("separation must be nonzero")
    a, b = one_step_increments(params, x, replicas, seed, independent)
    z = x + a - b
    vals = ((z.astype(np.float64) ** 2).sum(axis=1) - float((x.astype(np.float64) ** 2).sum())) ** order
    return DriftEstimate(tuple(int(c) for c in x), order, float(vals.mean()),
                         float(vals.std(ddof=1) / np.sqrt(replicas)), replicas)


def drift_constant(params: ModelParams, tol: float = 1e-12) -> float:
    """``alpha = 2 (d-1) m_2``: the limiting first drift of ``|Z|^2`` (``4 m_2`` for d = 3)."""
    return 2.0 * params.m * moment(params, 2, tol=tol)


def independent_drift_exact(law: StepLaw) -> float:
    """``2 (d-1) m_2(k) m_0(k)`` summed over the truncated law."""
    m = law.m
    m0 = float(law.shell_prob.sum())
    m2 = 0.0
    for k in range(1, law.k_max + 1):
        m2 += law.site_probability(k) * _shell_power_sum(m, k, 2, 0)
    return 2.0 * m * m2 * m0


@dataclass(frozen=True)
class ReturnSummary:
    restart: tuple
    horizon: int
    replicas: int
    return_times: np.ndarray
    censored: int

    @property
    def excursions(self) -> int:
        return len(self.return_times) + self.censored

    @property
    def returned_fraction(self) -> float:
        return len(self.return_times) / self.excursions if self.excursions else float("nan")


def modified_chain_return(params: ModelParams, restart, horizon: int, replicas: int, seed: int) -> ReturnSummary:
    """Run the chain that jumps from the origin to ``restart`` instead of staying there.

    Each replica starts at ``restart``; every visit to the origin closes an
    excursion and the second walker is moved so the difference is ``restart``
    again.  The excursion open at the horizon is counted as censored.
    """
    restart = np.asarray(restart, dtype=np.int64).reshape(params.m)
    if not restart.any():
        raise ValueError("restart point must be nonzero")
    seeds = derive_seeds(seed, replicas)
    r_max = default_search_radius(params)
    u, v = _start_pairs(params, restart, replicas)
    started = np.zeros(replicas, dtype=np.int64)
    times = []
    for n in range(1, horizon + 1):
        nxt = h_step_batch(params, np.concatenate([seeds, seeds]), np.concatenate([u, v]), r_max)
        u, v = nxt[:replicas], nxt[replicas:]
        hit = np.flatnonzero(np.all(u[:, :-1] == v[:, :-1], axis=1))
        if len(hit):
            times.extend((n - started[hit]).tolist())
            started[hit] = n
            v[hit, :-1] = u[hit, :-1] - restart
    return ReturnSummary(tuple(int(c) for c in restart), horizon, replicas,
                         np.array(times, dtype=np.int64), replicas)
