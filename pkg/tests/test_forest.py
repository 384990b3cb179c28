import numpy as np
import pytest

from drainnet.analytic import degree_pmf
from drainnet.environment import Environment
from drainnet.forest import (
    ancestor_census,
    branching_stats,
    component_labels,
    default_margin,
    degree_count,
    edge_length_count,
    simulate_window,
    top_row,
    tree_count,
)
from drainnet.step_law import ModelParams


@pytest.fixture(scope="module")
def window():
    return simulate_window(ModelParams(2, 0.5), 64, seed=3)


def test_one_out_edge_per_open_slab_site(window):
    env = Environment(window.params, window.seed)
    assert np.all(env.is_open(window.sources))
    assert np.all(window.targets[:, -1] == window.sources[:, -1] - 1)
    assert len(np.unique(window.sources, axis=0)) == len(window.sources)
    # the slab is [1-M, n+M] x [1, n+1]
    M, n = window.margin, window.n
    assert window.sources[:, 0].min() >= 1 - M and window.sources[:, 0].max() <= n + M
    assert set(np.unique(window.sources[:, -1])) <= set(range(1, n + 2))


def test_partitions(window):
    total = sum(degree_count(window, nu) for nu in range(0, 40))
    assert total == window.open_count
    lengths = sum(edge_length_count(window, l) for l in range(1, 60))
    assert lengths == int(window.touches_window.sum())


def test_degree_is_one_plus_indegree(window):
    env = Environment(window.params, window.seed)
    n = window.n
    pts = window.window_sites
    inner = pts[(pts[:, 0] > 20) & (pts[:, 0] < n - 20)][:50]
    for v in inner:
        above = np.array([[x, v[1] + 1] for x in range(v[0] - 20, v[0] + 21)])
        above = above[env.is_open(above)]
        indeg = int(np.all(env.h_step(above) == v, axis=1).sum()) if len(above) else 0
        idx = np.flatnonzero(np.all(pts == v, axis=1))[0]
        assert window.degrees[idx] == 1 + indeg


def test_degree_law_in_one_window():
    w = simulate_window(ModelParams(2, 0.3), 128, seed=5)
    hist = np.bincount(w.degrees, minlength=40)[:40] / w.open_count
    law = degree_pmf(0.3, cap=39).pmf
    assert 0.5 * np.abs(hist - law).sum() < 0.05


def test_near_one_is_mostly_vertical():
    w = simulate_window(ModelParams(2, 0.99), 32, seed=1)
    assert np.bincount(w.degrees).argmax() == 2
    lengths = w.edge_lengths[w.touches_window]
    assert (lengths == 1).mean() > 0.95


def test_determinism_and_margin():
    params = ModelParams(2, 0.5)
    a = simulate_window(params, 24, seed=8)
    b = simulate_window(params, 24, seed=8)
    assert a.summary() == b.summary()
    c = simulate_window(params, 24, seed=8, margin=2 * default_margin(params))
    assert np.array_equal(a.degree_histogram(), c.degree_histogram())
    assert [edge_length_count(a, l) for l in range(1, 8)] == [edge_length_count(c, l) for l in range(1, 8)]


def test_three_dimensional_window():
    w = simulate_window(ModelParams(3, 0.5), 16, seed=2)
    assert w.open_grid.shape == (16, 16, 16)
    assert sum(degree_count(w, nu) for nu in range(30)) == w.open_count


def test_tree_count(window):
    assert tree_count(window, 0) == len(top_row(window))
    counts = [tree_count(window, t) for t in (0, 4, 16, 64)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    labels = component_labels(window, 16)
    assert labels.max() + 1 == counts[2]
    with pytest.raises(ValueError):
        tree_count(window, window.n + 1)


def test_ancestor_census_nested():
    params = ModelParams(2, 0.5)
    c = ancestor_census(params, 0, [0, 2, 8, 32], 100, seed=4)
    assert c.exact
    assert all(a >= b for a, b in zip(c.counts, c.counts[1:]))
    env = Environment(params, 4)
    row = np.stack([np.arange(-100, 101), np.zeros(201, dtype=int)], axis=1)
    assert c.counts[0] == int(env.is_open(row).sum())


def test_ancestor_images_by_brute_force():
    params = ModelParams(2, 0.5)
    env = Environment(params, 12)
    c = ancestor_census(params, 0, [5], 10, seed=12)
    top = np.stack([np.arange(-200, 201), np.full(401, 5)], axis=1)
    cur = top[env.is_open(top)]
    for _ in range(5):
        cur = env.h_step(cur)
    hits = np.unique(cur[np.abs(cur[:, 0]) <= 10][:, 0])
    assert c.counts[0] == len(hits)


def test_branching_inequality_and_empty_window():
    params = ModelParams(2, 0.5)
    for seed in range(5):
        b = branching_stats(params, 16, 64, seed)
        assert b.inequality_holds
        assert b.r0_branching <= b.r0
    sparse = ModelParams(2, 0.02)
    env_seed = next(s for s in range(500)
                    if not Environment(sparse, s).is_open(np.array([[0, 0], [0, 1]])).any())
    b = branching_stats(sparse, 4, 0, env_seed)
    assert (b.r0, b.r1, b.r0_branching, b.r1_shifted) == (0, 0, 0, 0)
    with pytest.raises(ValueError):
        branching_stats(ModelParams(3, 0.5), 4, 8, 0)


def test_window_validation():
    with pytest.raises(ValueError):
        simulate_window(ModelParams(2, 0.5), 0, seed=1)
    with pytest.raises(ValueError):
        degree_count(simulate_window(ModelParams(2, 0.5), 4, 1), -1)
