"""Replica sampling and normality diagnostics for window counts.

``S_n`` counts open vertices of degree ``nu + 1`` in ``[1, n]^d`` and
``L_n`` counts edges of L1 length ``l`` touching the window.  Replica ``i``
uses the environment seeded by ``derive_seed(seed, i)``.

For ``d = 2`` the indicator field ``Y[x, j]`` (open with degree ``nu + 1``)
is stationary, mixing along rows and one-dependent along columns, so
``Var(S_n) / n^2`` tends to

    s2 = sum over h in Z, v in {-1, 0, 1} of Cov(Y[0, 0], Y[h, v]).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateSample
from .forest import ForestWindow, default_margin, degree_count, drain_slabs, edge_length_count
from .rng import derive_seeds
from .step_law import ModelParams

KINDS = ("degree", "edge")
MIN_REPLICAS = 100
MIN_VERDICT_REPLICAS = 500


@dataclass(frozen=True)
class ReplicaSample:
    params: ModelParams
    kind: str
    index: int  # nu for degree counts, l for edge-length counts
    n: int
    values: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("need at least two replicas")
        if np.any(self.values < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def replicas(self) -> int:
        return len(self.values)

    @property
    def seeds(self) -> np.ndarray:
        return derive_seeds(self.seed, self.replicas)


def _windows(params: ModelParams, n: int, seeds):
    margin = default_margin(params)
    for s, (src, tgt) in zip(seeds, drain_slabs(params, n, seeds, margin)):
        yield ForestWindow(params, n, margin, int(s), src, tgt)


def run_replicas(params: ModelParams, n: int, kind: str, replicas: int, seed: int, index: int = 1) -> ReplicaSample:
    """One ``S_n`` (``kind="degree"``, ``index=nu``) or ``L_n`` (``kind="edge"``, ``index=l``) per window."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if replicas < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas")
    count = degree_count if kind == "degree" else edge_length_count
    vals = np.fromiter((count(w, index) for w in _windows(params, n, derive_seeds(seed, replicas))),
                       dtype=np.int64, count=replicas)
    return ReplicaSample(params, kind, index, n, vals, seed)


@dataclass(frozen=True)
class Thresholds:
    max_abs_skew: float = 0.15
    max_abs_excess_kurtosis: float = 0.3
    max_ks: float = 0.05


@dataclass(frozen=True)
class CltReport:
    kind: str
    index: int
    n: int
    replicas: int
    mean: float
    variance: float
    scale: float  # sample std / n^(d/2)
    standardized: np.ndarray = field(repr=False)
    skewness: float = 0.0
    excess_kurtosis: float = 0.0
    ks_distance: float = 0.0
    thresholds: Thresholds = Thresholds()
    verdicts: dict | None = None  # None below the verdict replica count

    @property
    def passed(self) -> bool | None:
        return None if self.verdicts is None else all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "index": self.index, "n": self.n, "replicas": self.replicas,
            "mean": self.mean, "variance": self.variance, "scale": self.scale,
            "skewness": self.skewness, "excess_kurtosis": self.excess_kurtosis,
            "ks_distance": self.ks_distance,
            "thresholds": asdict(self.thresholds),
            "verdicts": self.verdicts, "passed": self.passed,
        }

    def standardized_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replica", "standardized"])
        for i, z in enumerate(self.standardized):
            w.writerow([i, repr(float(z))])
        return buf.getvalue()


def normality_report(sample: ReplicaSample | np.ndarray, thresholds: Thresholds = Thresholds(),
                     n: int | None = None, d: int | None = None) -> CltReport:
    """Moments and KS distance of the sample standardized by its own mean and scale.

    Plain arrays are accepted for synthetic checks; then ``n`` and ``d``
    only set the reported scale.
    """
    if isinstance(sample, ReplicaSample):
        x = sample.values.astype(np.float64)
        kind, index, n, d = sample.kind, sample.index, sample.n, sample.params.d
    else:
        x = np.asarray(sample, dtype=np.float64)
        kind, index, n, d = "raw", 0, n or 1, d or 0
    if len(x) < 2:
        raise ValueError("need at least two values")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0 or not np.isfinite(sd):
        raise DegenerateSample("sample has zero variance")
    z = (x - mean) / sd
    skew = float(stats.skew(z))
    kurt = float(stats.kurtosis(z))
    ks = float(stats.kstest(z, "norm").statistic)
    verdicts = None
    if len(x) >= MIN_VERDICT_REPLICAS:
        verdicts = {
            "skewness": abs(skew) < thresholds.max_abs_skew,
            "excess_kurtosis": abs(kurt) < thresholds.max_abs_excess_kurtosis,
            "ks_distance": ks < thresholds.max_ks,
        }
    return CltReport(kind, index, n, len(x), mean, sd * sd, sd / n ** (d / 2), z, skew, kurt, ks,
                     thresholds, verdicts)


# ----------------------------------------------------------- covariance field


def _lag_products(y: np.ndarray, h: int, v: int) -> tuple[float, int]:
    """Sum and count of ``y[x, j] * y[x + h, j + v]`` over pairs inside the grid."""
    n0, n1 = y.shape
    a = y[max(0, -h):n0 - max(0, h), max(0, -v):n1 - max(0, v)]
    b = y[max(0, h):n0 + min(0, h), max(0, v):n1 + min(0, v)]
    return float(np.sum(a * b)), a.size


def _replica_fields(params: ModelParams, n: int, nu: int, replicas: int, seed: int):
    if params.d != 2:
        raise ValueError("covariance diagnostics are implemented for d = 2")
    for w in _windows(params, n, derive_seeds(seed, replicas)):
        yield w.indicator_field(nu).astype(np.float64)


def _lag_covariances(params, n, nu, replicas, seed, offsets):
    """Per-replica covariances at ``(h, v)`` offsets, centred by the pooled mean."""
    sums = np.zeros((replicas, len(offsets)))
    counts = np.zeros(len(offsets))
    total = 0.0
    for r, y in enumerate(_replica_fields(params, n, nu, replicas, seed)):
        total += y.sum()
        for k, (h, v) in enumerate(offsets):
            sums[r, k], counts[k] = _lag_products(y, h, v)
    mu = total / (replicas * n * n)
    return sums / counts - mu * mu, mu


@dataclass(frozen=True)
class S2Estimate:
    nu: int
    n: int
    max_lag: int
    replicas: int
    terms: dict  # name -> (value, se)
    total: float
    total_se: float


def estimate_s2(params: ModelParams, n: int, nu: int, max_lag: int, replicas: int, seed: int) -> S2Estimate:
    """Truncated long-run variance of ``Y``; every horizontal lag beyond ``max_lag`` is dropped.

    Terms: ``variance`` (lag 0), ``row`` (``2 Cov(Y[0,0], Y[h,0])``, h = 1..L),
    ``up`` (``2 Cov(Y[0,0], Y[h,1])``, h = 0..L) and ``down``
    (``2 Cov(Y[0,1], Y[h,0])``, h = 1..L).
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the window side")
    groups = {
        "variance": [(0, 0)],
        "row": [(h, 0) for h in range(1, max_lag + 1)],
        "up": [(h, 1) for h in range(0, max_lag + 1)],
        "down": [(h, -1) for h in range(1, max_lag + 1)],
    }
    offsets = [o for g in groups.values() for o in g]
    cov, _ = _lag_covariances(params, n, nu, replicas, seed, offsets)
    weights = np.array([1.0 if name == "variance" else 2.0 for name, g in groups.items() for _ in g])
    per_rep = cov * weights
    terms, pos = {}, 0
    for name, g in groups.items():
        vals = per_rep[:, pos:pos + len(g)].sum(axis=1)
        terms[name] = (float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas)))
        pos += len(g)
    tot = per_rep.sum(axis=1)
    return S2Estimate(nu, n, max_lag, replicas, terms, float(tot.mean()), float(tot.std(ddof=1) / math.sqrt(replicas)))


@dataclass(frozen=True)
class DependenceTable:
    nu: int
    n: int
    replicas: int
    mean: float
    lags: tuple
    horizontal: np.ndarray  # rows: (cov, se) per lag
    vertical: np.ndarray

    def rows(self):
        for t, (hc, hs), (vc, vs) in zip(self.lags, self.horizontal, self.vertical):
            yield {"lag": int(t), "horizontal_cov": float(hc), "horizontal_se": float(hs),
                   "vertical_cov": float(vc), "vertical_se": float(vs)}


def dependence_diagnostics(params: ModelParams, lags, replicas: int, seed: int, nu: int = 1, n: int = 128) -> DependenceTable:
    """Covariance of ``Y`` at horizontal lags ``(t, 0)`` and vertical lags ``(0, t)``."""
    lags = tuple(sorted(set(int(t) for t in lags)))
    if not lags or lags[0] < 0 or lags[-1] > 64:
        raise ValueError("lags must lie in [0, 64]")
    if lags[-1] >= n:
        raise ValueError("lags must be smaller than the window side")
    offsets = [(t, 0) for t in lags] + [(0, t) for t in lags]
    cov, mu = _lag_covariances(params, n, nu, replicas, seed, offsets)
    est = cov.mean(axis=0)
    se = cov.std(axis=0, ddof=1) / math.sqrt(replicas)
    k = len(lags)
    return DependenceTable(nu, n, replicas, mu, lags,
                           np.column_stack([est[:k], se[:k]]), np.column_stack([est[k:], se[k:]]))
