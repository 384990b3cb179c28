import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from drainnet import rng
from drainnet.coalescence import meeting_probability
from drainnet.coupling import (
    coupling_runs,
    coupling_step,
    coupling_step_batch,
    decoupling_bound,
    decoupling_probability,
    default_K,
    default_starts,
    event_probability,
    multi_path_escape,
    floor_radius_decoupling_bound,
)
from drainnet.environment import h_step_batch
from drainnet.errors import BudgetExceeded
from drainnet.rng import derive_seeds
from drainnet.step_law import ModelParams, StepLaw, diamond_size

D4 = ModelParams(4, 0.5)


def pooled_chisquare(codes, expected_probs):
    obs = np.bincount(codes, minlength=len(expected_probs))
    exp = np.asarray(expected_probs) * len(codes)
    keep = exp > 5
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(exp[keep], exp[~keep].sum())
    if exp_k[-1] <= 5:
        obs_k, exp_k = obs_k[:-1], exp_k[:-1]
    return stats.chisquare(obs_k, exp_k * obs_k.sum() / exp_k.sum()).pvalue


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 63), sep=st.lists(st.integers(-5, 5), min_size=3, max_size=3))
def test_step_invariants(seed, sep):
    cs = coupling_step(D4, [0, 0, 0], sep, seed)
    assert np.abs(cs.phi - cs.u).sum() == cs.k_u[0]
    assert np.abs(cs.zeta - cs.v).sum() == cs.l_v[0]
    assert np.abs(cs.psi - cs.v).sum() == cs.m_v[0]
    if cs.diamonds_disjoint[0]:
        assert np.array_equal(cs.zeta, cs.psi)
        assert cs.l_v[0] == cs.m_v[0]


def test_forced_open_below_both():
    key = lambda s, label: rng.key_array(np.uint64(s), label)
    for s in range(200):
        cu = rng.uniforms(key(s, rng.COUPLE_OPEN_U), np.array([[0, 0, 0, 0]]))[0]
        cv = rng.uniforms(key(s, rng.COUPLE_OPEN_V), np.array([[0, 3, 0, 0]]))[0]
        if cu <= D4.p and cv <= D4.p:
            break
    cs = coupling_step(D4, [0, 0, 0], [3, 0, 0], s)
    assert (cs.k_u[0], cs.l_v[0], cs.m_v[0]) == (0, 0, 0)
    assert np.array_equal(cs.zeta, cs.psi)
    assert cs.diamonds_disjoint[0]


def test_phi_zeta_independent_step_laws():
    R = 100_000
    v = np.array([3, 0, 0])
    cs = coupling_step_batch(D4, derive_seeds(1, R), np.zeros((R, 3), int), np.broadcast_to(v, (R, 3)))
    law = StepLaw.build(D4)
    K = law.k_max + 1
    a = np.abs(cs.phi).sum(axis=1)
    b = np.abs(cs.zeta - v).sum(axis=1)
    joint = np.outer(law.shell_prob, law.shell_prob).ravel()
    assert pooled_chisquare(a * K + b, joint) > 1e-3


def test_phi_psi_matches_shared_environment_pair():
    R = 100_000
    v = np.array([2, 0, 0])
    cs = coupling_step_batch(D4, derive_seeds(1, R), np.zeros((R, 3), int), np.broadcast_to(v, (R, 3)))
    seeds = derive_seeds(2, R)
    pts = np.zeros((2 * R, 4), dtype=np.int64)
    pts[R:, :3] = v
    nxt = h_step_batch(D4, np.concatenate([seeds, seeds]), pts)

    def code(a, b):
        ra = np.minimum(np.abs(a).sum(axis=1), 3)
        rb = np.minimum(np.abs(b - v).sum(axis=1), 3)
        return ra * 8 + rb * 2 + np.all(a == b, axis=1)

    c1 = code(cs.phi, cs.psi)
    c2 = code(nxt[:R, :3], nxt[R:, :3])
    table = np.array([np.bincount(c, minlength=32) for c in (c1, c2)])
    table = table[:, table.sum(axis=0) > 0]
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_iterated_walk_has_iid_step_law_increments():
    R, steps = 2000, 10
    run = coupling_runs(D4, np.zeros((R, 3), int), np.tile([4, 0, 0], (R, 1)), steps, derive_seeds(3, R))
    assert run.violations == 0
    law = StepLaw.build(D4)
    inc = np.abs(run.walk_increments).sum(axis=2)
    assert pooled_chisquare(inc.ravel(), law.shell_prob) > 1e-3
    # consecutive increments are uncorrelated
    assert abs(np.corrcoef(inc[:-1].ravel(), inc[1:].ravel())[0, 1]) < 4 / np.sqrt(inc[:-1].size)
    # tree and walk agree before decoupling
    for r in range(R):
        f = run.first_decoupling[r]
        stop = steps + 1 if f < 0 else f
        assert np.array_equal(run.walk_v[:stop, r], run.tree_v[:stop, r])


def test_bounds():
    assert floor_radius_decoupling_bound(D4, 6) == pytest.approx(2 * 0.5 ** diamond_size(3, 3))
    assert decoupling_bound(D4, 7) == floor_radius_decoupling_bound(D4, 7)
    assert decoupling_bound(D4, 6) == pytest.approx(2 * 0.5 ** diamond_size(3, 2))
    assert floor_radius_decoupling_bound(ModelParams(4, 0.5), 12) < 1e-9


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_decoupling_within_corrected_bound(p):
    params = ModelParams(4, p)
    for s in range(2, 9):
        e = decoupling_probability(params, s, 20_000, seed=s)
        assert e.violations == 0
        assert e.estimate <= e.corrected_bound + 3 * e.se


def test_far_apart_never_decouples():
    e = decoupling_probability(ModelParams(4, 0.3), 12, 100_000, seed=1)
    assert e.estimate == 0.0


def test_default_K():
    for p in (0.1, 0.5, 0.9):
        K = default_K(p)
        c2 = 0.5 * abs(np.log1p(-p))
        assert c2 * K ** 3 > 4 >= c2 * (K - 1) ** 3
    assert default_K(0.5) == 3


def test_events_decay():
    f = [event_probability(D4, n, 0.25, "F", 2000, seed=1).estimate for n in (2, 4)]
    g = [event_probability(D4, n, 0.3, "G", 2000, seed=1).estimate for n in (2, 4)]
    e = [event_probability(D4, n, 0.25, "E", 2000, seed=1).estimate for n in (6, 8)]
    assert f[1] < f[0] and g[1] < g[0] and e[1] < e[0] < 0.5


def test_event_partition():
    # B excludes E-type near approach and both F and G
    b = event_probability(D4, 3, 0.25, "B", 500, seed=4).estimate
    f = event_probability(D4, 3, 0.25, "F", 500, seed=4).estimate
    g = event_probability(D4, 3, 0.25, "G", 500, seed=4).estimate
    assert b + f + g <= 1 + 1e-12


def test_event_validation():
    with pytest.raises(BudgetExceeded):
        event_probability(D4, 60, 0.25, "E", 10, seed=1)
    with pytest.raises(ValueError):
        event_probability(D4, 4, 0.4, "E", 10, seed=1)
    with pytest.raises(ValueError):
        event_probability(D4, 4, 0.2, "Q", 10, seed=1)


def test_starts_respect_separation_window():
    for d, k in ((2, 3), (4, 3), (4, 5)):
        s = default_starts(ModelParams(d, 0.5), k, 4, 0.3)
        dist = np.abs(s[:, None] - s[None]).sum(axis=2)[np.triu_indices(k, 1)]
        assert np.all(dist >= 4 ** 0.7) and np.all(dist <= 4 ** 1.3)


def test_two_paths_escape_equals_non_meeting():
    params = ModelParams(2, 0.5)
    esc = multi_path_escape(params, 2, 3, 0.3, 300, seed=9, starts=[[3], [0]])
    meet = meeting_probability(params, 3, 81, 300, seed=9)
    assert esc.estimate == pytest.approx(1 - meet.fraction)


def test_escape_dimension_contrast():
    hi = multi_path_escape(ModelParams(4, 0.5), 3, 4, 0.3, 300, seed=3)
    lo = multi_path_escape(ModelParams(2, 0.5), 3, 4, 0.3, 300, seed=3)
    print(f"three-path escape: d=4 {hi.estimate:.3f}, d=2 {lo.estimate:.3f}")
    assert hi.estimate > 0
    assert lo.estimate < hi.estimate
