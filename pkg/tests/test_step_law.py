import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from drainnet.step_law import (
    ModelParams,
    StepLaw,
    diamond_points,
    diamond_size,
    moment,
    moment_table,
    shell_points,
    shell_size,
    truncation_radius,
)


def brute_norms(m, k):
    axis = np.arange(-k, k + 1)
    grid = np.array(list(itertools.product(axis, repeat=m)))
    return np.abs(grid).sum(axis=1)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_diamond_counts_match_enumeration(m, k):
    norms = brute_norms(m, k)
    assert diamond_size(m, k) == int((norms <= k).sum())
    assert shell_size(m, k) == int((norms == k).sum())


@given(m=st.integers(1, 4), k=st.integers(0, 9))
def test_shell_points_are_the_shell(m, k):
    pts = shell_points(m, k)
    assert pts.shape == (shell_size(m, k), m)
    assert np.all(np.abs(pts).sum(axis=1) == k)
    assert len(np.unique(pts, axis=0)) == len(pts)
    assert len(diamond_points(m, k)) == diamond_size(m, k)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1, 0.5)
    with pytest.raises(ValueError):
        ModelParams(2, 1.0)
    assert ModelParams(4, 0.5).m == 3


def site_probability_by_ties(m, p, k):
    """P(step = u) for |u|_1 = k via the tie-break average over open competitors."""
    if k == 0:
        return p
    S = shell_size(m, k)
    j = np.arange(S)
    win = np.sum(stats.binom.pmf(j, S - 1, p) / (j + 1))
    return (1 - p) ** diamond_size(m, k - 1) * p * win


@pytest.mark.parametrize("d,p", [(2, 0.3), (3, 0.5), (4, 0.7)])
def test_shell_law_matches_tie_average(d, p):
    law = StepLaw.build(ModelParams(d, p))
    for k in range(min(law.k_max, 6) + 1):
        assert law.site_probability(k) == pytest.approx(site_probability_by_ties(d - 1, p, k), rel=1e-10)


def test_small_values():
    law = StepLaw.build(ModelParams(2, 0.5))
    assert law.shell_probability(0) == 0.5
    assert law.shell_probability(1) == pytest.approx(0.375)
    assert law.point_probability([1]) == pytest.approx(0.1875)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_total_mass_and_truncation(d, p):
    law = StepLaw.build(ModelParams(d, p))
    assert law.tail_mass < 1e-12
    assert abs(law.shell_prob.sum() + law.tail_mass - 1.0) < 1e-12
    k = truncation_radius(d - 1, p, 1e-12)
    assert (1 - p) ** diamond_size(d - 1, k - 1) < 1e-12
    assert k == 1 or (1 - p) ** diamond_size(d - 1, k - 2) >= 1e-12


def test_shell_probability_out_of_range():
    law = StepLaw.build(ModelParams(2, 0.5))
    with pytest.raises(ValueError):
        law.shell_probability(law.k_max + 1)


def brute_second_moment(p, radius=50):
    """E[u_1^2] for d = 3 summed point by point over the diamond of the given radius."""
    axis = np.arange(-radius, radius + 1)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    k = np.abs(x) + np.abs(y)
    inside = k <= radius
    counts = np.bincount(k[inside].ravel(), minlength=radius + 1)
    before = np.concatenate([[0], np.cumsum(counts)[:-1]])
    shell = np.where(np.arange(radius + 1) == 0, p,
                     (1 - p) ** before.astype(float) * (1 - (1 - p) ** counts.astype(float)))
    prob = shell[k[inside]] / counts[k[inside]]
    return float(np.sum(prob * x[inside].astype(float) ** 2))


@pytest.mark.parametrize("p", [0.3, 0.5])
def test_second_moment_matches_double_sum(p):
    assert abs(moment(ModelParams(3, p), 2) - brute_second_moment(p)) < 1e-10


def test_moments_basic():
    params = ModelParams(3, 0.5)
    assert moment(params, 0) == pytest.approx(1.0, abs=1e-12)
    assert moment(params, 1) == 0.0
    assert moment(params, 3, 2) == 0.0
    table = moment_table(params, 4)
    assert table[2] == pytest.approx(moment(params, 2))
    assert table[(2, 2)] == pytest.approx(moment(params, 2, 2))
    with pytest.raises(ValueError):
        moment(ModelParams(2, 0.5), 2, 2)


def test_mixed_moment_by_sampling():
    params = ModelParams(3, 0.3)
    law = StepLaw.build(params)
    x = law.sample(np.random.default_rng(4), 400_000).astype(float)
    vals = x[:, 0] ** 2 * x[:, 1] ** 2
    assert abs(vals.mean() - moment(params, 2, 2)) < 4 * vals.std() / math.sqrt(len(vals))


@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 4), p=st.floats(0.05, 0.95), seed=st.integers(0, 2 ** 32))
def test_samples_lie_in_truncation(d, p, seed):
    law = StepLaw.build(ModelParams(d, p))
    x = law.sample(np.random.default_rng(seed), 200)
    assert x.shape == (200, d - 1)
    assert np.abs(x).sum(axis=1).max() <= law.k_max


def test_sampler_is_symmetric():
    law = StepLaw.build(ModelParams(3, 0.3))
    x = law.sample(np.random.default_rng(1), 200_000)
    se = x.std(axis=0) / math.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0)) < 4 * se)
