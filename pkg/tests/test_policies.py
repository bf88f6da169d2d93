import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udcache.policies import (ConstantPolicy, MeanFieldPolicy, PolicyError, PopularityPolicy,
                              candidate_grid, exhaustive_search, random_policy)

P_MAX = 0.999


def test_popularity_and_constant():
    assert PopularityPolicy(P_MAX).decide(0.0, 0.3, 0.5) == pytest.approx(0.3)
    assert PopularityPolicy(P_MAX, scale=5.0).decide(0.0, 0.3, 0.5) == P_MAX
    out = ConstantPolicy(0.35, P_MAX).decide(0.0, np.array([0.1, 0.9]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, 0.35)
    with pytest.raises(PolicyError):
        ConstantPolicy(1.5, P_MAX)


def test_random_policy_law():
    pol = random_policy(np.random.default_rng(4), P_MAX)
    draws = pol.decide(0.0, np.full(100_000, 0.5), 0.5)
    assert draws.mean() == pytest.approx(P_MAX / 2, rel=0.01)
    again = random_policy(np.random.default_rng(4), P_MAX).decide(0.0, np.full(100_000, 0.5), 0.5)
    np.testing.assert_array_equal(draws, again)
    assert np.all(random_policy(np.random.default_rng(0), 0.0).decide(0, np.ones(10), 0.5) == 0)


def test_mf_policy_requires_convergence(default_solution):
    from dataclasses import replace
    with pytest.raises(PolicyError):
        MeanFieldPolicy(replace(default_solution, converged=False))


def test_mf_policy_node_identity_and_terminal_slice(default_solution):
    sol = default_solution
    pol = MeanFieldPolicy(sol)
    g = sol.grid
    for n, i, k in [(0, 0, 0), (17, 12, 33), (len(g.t) - 1, 40, 50), (120, 30, 7)]:
        assert pol.decide(g.t[n], g.x[i], g.q[k]) == pytest.approx(sol.policy[n, i, k], abs=1e-12)
    q = g.q[::5]
    np.testing.assert_allclose(pol.decide(g.t[-1], np.full(q.shape, g.x[20]), q),
                               sol.policy[-1, 20, ::5], atol=1e-12)


@given(st.floats(0, 2), st.floats(0.01, 0.99), st.floats(0, 1))
def test_mf_policy_between_neighbours(default_solution, t, x, q):
    sol = default_solution
    pol = MeanFieldPolicy(sol)
    g = sol.grid
    n = min(int(t / g.dt), len(g.t) - 2)
    i = min(int((x - g.x[0]) / g.dx), len(g.x) - 2)
    k = min(int(q / g.dq), len(g.q) - 2)
    cube = sol.policy[n:n + 2, i:i + 2, k:k + 2]
    v = pol.decide(t, x, q)
    assert cube.min() - 1e-12 <= v <= cube.max() + 1e-12


def test_mf_policy_clamps_and_counts_out_of_grid(default_solution):
    pol = MeanFieldPolicy(default_solution)
    v = pol.decide(0.0, 1.5, -0.2)
    assert 0 <= v <= pol.p_max
    assert pol.out_of_grid == 2


@given(st.floats(0, 1), st.floats(0, 1))
def test_all_policies_respect_clamp(x, q):
    for pol in (PopularityPolicy(0.6), ConstantPolicy(0.2, 0.6),
                random_policy(np.random.default_rng(0), 0.6)):
        assert 0.0 <= pol.decide(0.0, x, q) <= 0.6


def test_candidate_grid_counts():
    c = candidate_grid(0.05, P_MAX)
    assert len(c) == 20 and c[0] == 0.0 and c[-1] == pytest.approx(0.95)
    with pytest.raises(PolicyError):
        candidate_grid(0.0, P_MAX)


def test_exhaustive_search_convex_and_order_invariant():
    cands = candidate_grid(0.05, P_MAX)
    est = lambda c: (c - 0.35) ** 2
    best, table = exhaustive_search(cands, est)
    assert best == pytest.approx(0.35)
    best_rev, table_rev = exhaustive_search(cands[::-1], est)
    assert best_rev == best and table_rev == table
    tie, _ = exhaustive_search([0.1, 0.2, 0.3], lambda c: 1.0)
    assert tie == 0.1
    with pytest.raises(PolicyError):
        exhaustive_search([], est)
