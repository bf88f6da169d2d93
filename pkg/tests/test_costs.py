import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udcache.costs import (CostBreakdown, TerminalCost, backhaul_cost, instantaneous_cost,
                           lra_cost, storage_cost)
from udcache.dynamics import CacheSpec, ContentSpec

CACHE = CacheSpec()
SPEC = ContentSpec()


def test_backhaul_examples():
    assert backhaul_cost(0.0, 1.0, 1.0) == 0.0
    assert backhaul_cost(0.5, 1.0, 1.0) == pytest.approx(0.6931, abs=1e-4)
    assert backhaul_cost(1.0, 1.0, 1.0) == math.inf
    assert backhaul_cost(1 - 1e-12, 1.0, 1.0) > 25


@given(st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0, 1))
def test_backhaul_convex(p1, p2, theta):
    mid = backhaul_cost(theta * p1 + (1 - theta) * p2, 1.0, 1.0)
    assert mid <= theta * backhaul_cost(p1, 1.0, 1.0) + (1 - theta) * backhaul_cost(p2, 1.0, 1.0) + 1e-12


def test_storage_examples():
    assert storage_cost(1.0, CACHE) == 0.0
    assert storage_cost(0.0, CACHE) == pytest.approx(0.01)
    assert storage_cost(0.5, CACHE) == pytest.approx(0.005)


def test_instantaneous_examples():
    only_storage = instantaneous_cost(0.0, 0.0, 1.0, 0.5, 0.3, SPEC, CACHE)
    assert only_storage.total == pytest.approx(storage_cost(0.3, CACHE))
    a = instantaneous_cost(0.4, 0.0, 1.0, 0.5, 1.0, SPEC, CACHE)
    b = instantaneous_cost(0.4, 1.0, 1.0, 0.5, 1.0, SPEC, CACHE)
    assert b.total == pytest.approx(2 * a.total)
    c = instantaneous_cost(0.5, 0.0, 1.0, 0.5, 1.0, SPEC, CACHE)
    assert c.total == pytest.approx(1.3863, abs=1e-4)


@given(st.floats(0.01, 0.95), st.floats(0, 0.5), st.floats(0.1, 5), st.floats(0.01, 0.99),
       st.floats(0, 1))
def test_breakdown_recomputes(p, i_r, se, x, q):
    bd = instantaneous_cost(p, i_r, se, x, q, SPEC, CACHE)
    assert isinstance(bd, CostBreakdown)
    assert bd.recompute() == pytest.approx(bd.total)
    assert bd.replication_factor >= 1


@given(st.floats(0.01, 0.95), st.floats(0.1, 5), st.floats(0.02, 0.98))
def test_cost_decreasing_in_se_and_x(p, se, x):
    base = instantaneous_cost(p, 0.0, se, x, 0.5, SPEC, CACHE).total
    assert instantaneous_cost(p, 0.0, se * 1.1, x, 0.5, SPEC, CACHE).total < base
    assert instantaneous_cost(p, 0.0, se, x * 1.01, 0.5, SPEC, CACHE).total < base


def test_instantaneous_guards():
    with pytest.raises(ValueError):
        instantaneous_cost(0.1, 0.0, 0.0, 0.5, 0.5, SPEC, CACHE)
    with pytest.raises(ValueError):
        instantaneous_cost(0.1, -0.1, 1.0, 0.5, 0.5, SPEC, CACHE)
    assert instantaneous_cost(1.0, 0.0, 1.0, 0.5, 0.5, SPEC, CACHE).total == math.inf


def test_lra_constant_and_single_step():
    t = np.linspace(0, 2, 11)
    assert lra_cost(t, np.full(11, 3.0)) == pytest.approx(6.0)
    assert lra_cost([0.0], [5.0], terminal=1.5) == 1.5
    assert lra_cost(t, np.where(t > 1, math.inf, 1.0)) == math.inf


def test_lra_trapezoid_second_order():
    f = np.sin
    exact = 1 - math.cos(2.0)
    errs = [abs(lra_cost(np.linspace(0, 2, n + 1), f(np.linspace(0, 2, n + 1))) - exact)
            for n in (10, 20, 40)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.02)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=20), st.lists(st.floats(0, 10), min_size=1, max_size=20))
def test_lra_additive_over_concatenation(first, rest):
    t1 = np.arange(len(first), dtype=float)
    t2 = t1[-1] + np.arange(len(rest) + 1, dtype=float)
    whole_t = np.concatenate([t1, t2[1:]])
    whole = np.concatenate([first, rest])
    split = lra_cost(t1, first) + lra_cost(t2, np.concatenate([[first[-1]], rest]), terminal=2.0)
    assert lra_cost(whole_t, whole, terminal=2.0) == pytest.approx(split)


def test_terminal_forms():
    unused = TerminalCost("unused", 6.0, 0.5)
    q = np.linspace(0, 1, 11)
    k = unused(q, CACHE)
    assert k[0] == 0.0
    assert np.all(np.diff(k) > 0) and np.all(np.diff(k, 2) > 0)  # increasing, convex
    # slope matches a centered difference
    h = 1e-6
    assert unused.slope(0.4, CACHE) == pytest.approx((unused(0.4 + h, CACHE) - unused(0.4 - h, CACHE)) / (2 * h), rel=1e-6)
    assert TerminalCost("unused", 2.0)(0.3, CACHE) == pytest.approx(0.6)
    occ = TerminalCost("occupied", 2.0)
    assert occ(0.0, CACHE) == pytest.approx(2.0 * CACHE.gamma)
    assert TerminalCost("none", 9.0)(0.3, CACHE) == 0.0
    with pytest.raises(ValueError):
        TerminalCost("quadratic", 1.0)
    with pytest.raises(ValueError):
        TerminalCost("unused", 1.0, -1.0)
