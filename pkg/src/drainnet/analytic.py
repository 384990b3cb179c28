"""Exact two-dimensional laws: vertex degree and up-edge offsets.

Given that a vertex is open, its degree is ``1 + Y + X1 + X2`` with
``Y ~ Bernoulli(p)`` (the site straight above) and ``X1, X2`` the numbers of
drained sites on the left and right of the level above.  The number of
up-edges with horizontal offset ``l`` is ``Binomial(2, q_l)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_p(p: float) -> None:
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")


def x1_tail(p: float, r: int) -> float:
    """``P(X1 >= r)``."""
    _check_p(p)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 1.0
    c = 3.0 - 3.0 * p + p * p
    return (1.0 - p) ** (2 * r - 1) * (2.0 - p) / (2.0 * c ** r)


def x1_pmf(p: float, cap: int) -> np.ndarray:
    """``P(X1 = r)`` for ``r = 0..cap``."""
    tails = np.array([x1_tail(p, r) for r in range(cap + 2)])
    return tails[:-1] - tails[1:]


@dataclass(frozen=True)
class DegreeLaw:
    """Degree distribution of an open vertex; ``pmf[k] = P(degree = k)``."""

    p: float
    cap: int
    pmf: np.ndarray
    residual: float

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    def prob(self, degree: int) -> float:
        return float(self.pmf[degree]) if 0 <= degree <= self.cap else 0.0


def degree_pmf(p: float, cap: int = 64) -> DegreeLaw:
    """Law of ``1 + Y + X1 + X2`` by exact convolution, truncated at degree ``cap``."""
    _check_p(p)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    x = x1_pmf(p, cap)
    up = np.convolve(np.convolve(x, x), [1.0 - p, p])
    pmf = np.zeros(cap + 1)
    pmf[1:] = up[:cap]
    pmf.setflags(write=False)
    return DegreeLaw(p, cap, pmf, float(max(0.0, 1.0 - pmf.sum())))


def expected_degree(p: float, cap: int = 64) -> tuple[float, float]:
    """The exact mean degree (2) and the mean recomputed from :func:`degree_pmf`."""
    _check_p(p)
    return 2.0, degree_pmf(p, cap).mean


def offset_parameter(p: float, l: int) -> float:
    """Probability ``q_l`` that the site at horizontal offset ``l`` on one side drains here.

    The upper site must be open (``p``), the ``2l - 1`` lower sites strictly
    closer to it closed, and the competing site at equal distance either closed
    or beaten on the tie-break (``1 - p/2``).
    """
    _check_p(p)
    if l < 1:
        raise ValueError("offset must be >= 1")
    return p * (1.0 - p / 2.0) * (1.0 - p) ** (2 * l - 1)


def unscaled_offset_parameter(p: float, l: int) -> float:
    """``(1 - p/2)(1-p)^(2l-1)``: the same quantity without the openness factor."""
    _check_p(p)
    if l < 1:
        raise ValueError("offset must be >= 1")
    return (1.0 - p / 2.0) * (1.0 - p) ** (2 * l - 1)


@dataclass(frozen=True)
class EdgeOffsetLaw:
    """Up-edge counts at horizontal offset ``l``: ``Binomial(2, q)``."""

    p: float
    offset: int
    q: float
    pmf: np.ndarray
    unscaled_q: float

    @property
    def l1_length(self) -> int:
        return self.offset + 1


def edge_offset_pmf(p: float, l: int) -> EdgeOffsetLaw:
    q = offset_parameter(p, l)
    pmf = np.array([(1 - q) ** 2, 2 * q * (1 - q), q * q])
    return EdgeOffsetLaw(p, l, q, pmf, unscaled_offset_parameter(p, l))


def up_degree_conservation(p: float, max_offset: int = 10_000) -> float:
    """``p + sum_l 2 q_l``: the expected number of up-edges (equals 1)."""
    ls = np.arange(1, max_offset + 1)
    q = p * (1.0 - p / 2.0) * (1.0 - p) ** (2 * ls - 1)
    return float(p + 2.0 * q.sum())
