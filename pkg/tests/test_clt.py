import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drainnet.analytic import degree_pmf
from drainnet.clt import (
    ReplicaSample,
    dependence_diagnostics,
    estimate_s2,
    normality_report,
    run_replicas,
)
from drainnet.errors import DegenerateSample
from drainnet.step_law import ModelParams

D2 = ModelParams(2, 0.5)


@pytest.fixture(scope="module")
def sample64():
    return run_replicas(D2, 64, "degree", 500, seed=1)


def test_replicas_are_reproducible():
    a = run_replicas(D2, 16, "edge", 100, seed=4)
    b = run_replicas(D2, 16, "edge", 100, seed=4)
    assert np.array_equal(a.values, b.values)
    assert a.replicas == 100 and len(a.seeds) == 100
    with pytest.raises(ValueError):
        run_replicas(D2, 16, "edge", 99, seed=4)
    with pytest.raises(ValueError):
        run_replicas(D2, 16, "vertex", 100, seed=4)


def test_mean_matches_degree_law(sample64):
    n = sample64.n
    target = degree_pmf(0.5).prob(2)
    ratio = sample64.values / (n ** 2 * 0.5)
    assert abs(ratio.mean() - target) < 3 * ratio.std(ddof=1) / np.sqrt(len(ratio))


def test_variance_scales_with_area(sample64):
    big = run_replicas(D2, 128, "degree", 500, seed=2)
    ratio = big.values.var(ddof=1) / sample64.values.var(ddof=1)
    assert 4 * 0.7 <= ratio <= 4 * 1.3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10 ** 6), min_size=3, max_size=200).filter(lambda v: len(set(v)) > 1))
def test_standardization_is_exact(values):
    rep = normality_report(np.array(values))
    assert abs(rep.standardized.mean()) < 1e-9
    assert abs(rep.standardized.var(ddof=1) - 1) < 1e-9
    assert rep.verdicts is None


def test_degenerate_sample():
    with pytest.raises(DegenerateSample):
        normality_report(np.full(600, 7))
    with pytest.raises(ValueError):
        ReplicaSample(D2, "degree", 1, 8, np.array([1]))


def test_synthetic_oracles():
    gen = np.random.default_rng(0)
    assert normality_report(gen.normal(size=10_000)).passed
    rep = normality_report(gen.exponential(size=10_000))
    assert not rep.verdicts["ks_distance"]
    assert not rep.passed


def test_s2_truncation_and_consistency(sample64):
    s20 = estimate_s2(D2, 64, 1, 20, 300, seed=5)
    s40 = estimate_s2(D2, 64, 1, 40, 300, seed=5)
    assert set(s20.terms) == {"variance", "row", "up", "down"}
    assert abs(s20.total - s40.total) < 3 * max(s20.total_se, s40.total_se)
    var = sample64.values.var(ddof=1) / 64 ** 2
    var_se = var * np.sqrt(2 / (sample64.replicas - 1))
    assert abs(var - s20.total) < 3 * np.hypot(var_se, s20.total_se)


def test_s2_terms_are_lag_sums():
    s1 = estimate_s2(D2, 32, 1, 1, 100, seed=6)
    dd = dependence_diagnostics(D2, [0, 1], 100, seed=6, n=32)
    assert s1.terms["variance"][0] == pytest.approx(dd.horizontal[0, 0])
    assert s1.terms["row"][0] == pytest.approx(2 * dd.horizontal[1, 0])
    with pytest.raises(ValueError):
        estimate_s2(D2, 32, 1, 0, 100, seed=6)


def test_dependence_structure():
    dd = dependence_diagnostics(D2, [0, 1, 2, 3, 4, 8, 16, 32], 300, seed=7, n=64)
    q = 0.5 * degree_pmf(0.5).prob(2)
    cov0, se0 = dd.horizontal[0]
    assert abs(cov0 - q * (1 - q)) < 3 * se0
    for t, (c, se) in zip(dd.lags, dd.vertical):
        if t >= 2:
            assert abs(c) < 3 * se
    h = dd.horizontal[1:, 0]
    assert abs(h[-1]) < 3 * dd.horizontal[-1, 1]
    assert abs(h[0]) > abs(h[4])
    with pytest.raises(ValueError):
        dependence_diagnostics(D2, [65], 10, seed=1)


@pytest.mark.slow
def test_fitted_scale_is_stable():
    scales = [normality_report(run_replicas(D2, n, "degree", 500, seed=n)).scale for n in (64, 128, 256)]
    print("fitted scales", scales)
    for a, b in zip(scales, scales[1:]):
        assert 0.8 <= b / a <= 1.25
