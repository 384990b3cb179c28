"""One-step horizontal displacement law of a drainage path.

A path at ``u`` moves to the nearest open site one level down.  With
``m = d - 1`` horizontal coordinates, the displacement is ``0`` with
probability ``p``; otherwise it lies on the L1 shell of radius ``k`` with
probability ``(1-p)^#D_{k-1} (1 - (1-p)^#dD_k)``, spread uniformly over the
shell (ties are broken by i.i.d. uniforms).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_TRUNCATION = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Lattice dimension ``d`` and open-site probability ``p``."""

    d: int
    p: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.d!r}")
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p must lie strictly inside (0, 1), got {self.p!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", float(self.p))

    @property
    def m(self) -> int:
        """Dimension of the horizontal displacement space."""
        return self.d - 1


def diamond_size(m: int, k: int) -> int:
    """Number of points of Z^m with L1 norm at most ``k``."""
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    return sum((1 << i) * math.comb(m, i) * math.comb(k, i) for i in range(min(m, k) + 1))


def shell_size(m: int, k: int) -> int:
    """Number of points of Z^m with L1 norm exactly ``k``."""
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    if k == 0:
        return 1
    return sum((1 << i) * math.comb(m, i) * math.comb(k - 1, i - 1) for i in range(1, min(m, k) + 1))


@lru_cache(maxsize=None)
def shell_points(m: int, k: int) -> np.ndarray:
    """All points of Z^m with L1 norm ``k``, shape ``(shell_size(m, k), m)``.

    The row order is canonical (lexicographic in the leading coordinate) and
    the array is read-only.
    """
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    if m == 1:
        pts = np.array([[0]] if k == 0 else [[-k], [k]], dtype=np.int64)
    else:
        blocks = []
        for a in range(-k, k + 1):
            rest = shell_points(m - 1, k - abs(a))
            blocks.append(np.column_stack([np.full(len(rest), a, dtype=np.int64), rest]))
        pts = np.concatenate(blocks)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=None)
def diamond_points(m: int, k: int) -> np.ndarray:
    """All points of Z^m with L1 norm at most ``k``, ordered by shell."""
    pts = np.concatenate([shell_points(m, r) for r in range(k + 1)])
    pts.setflags(write=False)
    return pts


def _log_closed(p: float, count: int) -> float:
    return count * math.log1p(-p)


def truncation_radius(m: int, p: float, tol: float) -> int:
    """Smallest ``k >= 1`` with ``(1-p)^#D_{k-1} < tol``."""
    log_tol = math.log(tol)
    k = 1
    while _log_closed(p, diamond_size(m, k - 1)) >= log_tol:
        k += 1
    return k


def raw_shell_probability(m: int, p: float, k: int) -> float:
    """Untruncated probability that one step has L1 length ``k``."""
    if k == 0:
        return p
    before = math.exp(_log_closed(p, diamond_size(m, k - 1)))
    return before * -math.expm1(_log_closed(p, shell_size(m, k)))


@dataclass(frozen=True)
class StepLaw:
    """Truncated closed form of the displacement law.

    ``shell_prob[k]`` is the probability of L1 step length ``k`` for
    ``k = 0..k_max``; ``tail_mass`` is the (exact) probability of a longer step.
    """

    params: ModelParams
    k_max: int
    shell_prob: np.ndarray = field(repr=False)
    tail_mass: float

    @classmethod
    def build(cls, params: ModelParams, tol: float = DEFAULT_TRUNCATION) -> "StepLaw":
        m, p = params.m, params.p
        k_max = truncation_radius(m, p, tol)
        probs = np.array([raw_shell_probability(m, p, k) for k in range(k_max + 1)])
        probs.setflags(write=False)
        tail = math.exp(_log_closed(p, diamond_size(m, k_max)))
        return cls(params, k_max, probs, tail)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def shell_sizes(self) -> np.ndarray:
        return np.array([shell_size(self.m, k) for k in range(self.k_max + 1)])

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.shell_prob)

    def shell_probability(self, k: int) -> float:
        """Probability that the step has L1 length exactly ``k``."""
        if not 0 <= k <= self.k_max:
            raise ValueError(f"radius {k} outside truncation range 0..{self.k_max}")
        return float(self.shell_prob[k])

    def site_probability(self, k: int) -> float:
        """Probability of one particular displacement on shell ``k``."""
        return self.shell_probability(k) / shell_size(self.m, k)

    def point_probability(self, u) -> float:
        k = int(np.abs(np.asarray(u)).sum())
        if k > self.k_max:
            return 0.0
        return self.site_probability(k)

    def sample_radius(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw L1 step lengths; draws landing in the truncated tail are redrawn."""
        cdf = self.cdf
        out = np.searchsorted(cdf, rng.random(size), side="right")
        bad = out > self.k_max
        while bad.any():
            out[bad] = np.searchsorted(cdf, rng.random(int(bad.sum())), side="right")
            bad = out > self.k_max
        return out

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw displacements: a radius from ``shell_prob``, then a uniform shell point."""
        n = 1 if size is None else int(size)
        radii = self.sample_radius(rng, n)
        out = np.zeros((n, self.m), dtype=np.int64)
        for k in np.unique(radii):
            sel = np.flatnonzero(radii == k)
            pts = shell_points(self.m, int(k))
            out[sel] = pts[rng.integers(0, len(pts), size=len(sel))]
        return out[0] if size is None else out


def sample_step(law: StepLaw, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    return law.sample(rng, size)


@lru_cache(maxsize=None)
def _shell_power_sum(m: int, k: int, i: int, j: int) -> float:
    pts = shell_points(m, k).astype(np.float64)
    vals = pts[:, 0] ** i
    if j:
        vals = vals * pts[:, 1] ** j
    return float(vals.sum())


def moment(params: ModelParams | StepLaw, i: int, j: int | None = None, tol: float = 1e-12) -> float:
    """Mixed moment ``E[u_1^i u_2^j]`` of one step (``j=None`` for ``E[u_1^i]``).

    Shells are summed until the tail bound ``sum_{k>K} k^(i+j) (1-p)^#D_{k-1}``
    drops below ``tol``.  Odd orders vanish by symmetry and return 0 exactly.
    """
    if isinstance(params, StepLaw):
        params = params.params
    if i < 0 or (j is not None and j < 0):
        raise ValueError("orders must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    jj = 0 if j is None else j
    if jj and params.m < 2:
        raise ValueError("mixed moments need at least two horizontal coordinates")
    if i % 2 or jj % 2:
        return 0.0
    return _moment_sum(params.m, params.p, i, jj, tol)[0]


def moment_tail_bound(m: int, p: float, order: int, K: int) -> float:
    """Upper bound on the contribution of shells beyond ``K`` to an ``order``-th moment."""
    total = 0.0
    k = K + 1
    while True:
        term = k ** order * math.exp(_log_closed(p, diamond_size(m, k - 1)))
        total += term
        if term < 1e-300 or term < total * 1e-17:
            return total
        k += 1


def _moment_sum(m: int, p: float, i: int, j: int, tol: float) -> tuple[float, int, float]:
    total = p if (i == 0 and j == 0) else 0.0
    K = 0
    while True:
        K += 1
        site = raw_shell_probability(m, p, K) / shell_size(m, K)
        total += site * _shell_power_sum(m, K, i, j)
        bound = moment_tail_bound(m, p, i + j, K)
        if bound < tol:
            return total, K, bound


@dataclass(frozen=True)
class MomentTable:
    """Even moments ``m_i`` and mixed moments ``m_{i,j}`` of one step."""

    params: ModelParams
    single: dict
    mixed: dict
    radius: int
    tail_bound: float

    def __getitem__(self, key):
        if isinstance(key, tuple):
            i, j = key
            if i % 2 or j % 2:
                return 0.0
            return self.mixed[(i, j)]
        if key % 2:
            return 0.0
        return self.single[key]


def moment_table(params: ModelParams, max_order: int = 4, tol: float = 1e-12) -> MomentTable:
    single, mixed = {}, {}
    radius, bound = 0, 0.0
    for i in range(0, max_order + 1, 2):
        val, K, b = _moment_sum(params.m, params.p, i, 0, tol)
        single[i] = val
        radius, bound = max(radius, K), max(bound, b)
        if params.m >= 2 and i > 0:
            for j in range(2, max_order - i + 1, 2):
                val, K, b = _moment_sum(params.m, params.p, i, j, tol)
                mixed[(i, j)] = val
                radius, bound = max(radius, K), max(bound, b)
    return MomentTable(params, single, mixed, radius, bound)
