import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from udcache.geometry import (NetworkParams, ParameterError, PointSet, active_probability,
                              empirical_interference, exp1, log1p_exp_mean,
                              mean_field_interference, path_loss, sample_ppp, scaled_exp1,
                              scaled_exp1_laguerre, sinr, spectral_efficiency,
                              spectral_efficiency_mc)

R_DEFAULT = 10 / math.sqrt(math.pi)


def test_network_params_rejects_alpha_two():
    with pytest.raises(ParameterError):
        NetworkParams(alpha=2.0)


def test_network_params_warns_outside_dense_regime():
    with pytest.warns(UserWarning):
        NetworkParams(lambda_b=0.0005, lambda_u=0.001)


@pytest.mark.parametrize("bad", [dict(lambda_b=0), dict(lambda_u=-1), dict(radius_R=0),
                                 dict(n_antennas=0), dict(lambda_b=float("nan"))])
def test_network_params_invariants(bad):
    with pytest.raises(ParameterError):
        NetworkParams(**bad)


def test_ppp_empty_at_zero_density(rng):
    assert len(sample_ppp(0.0, 3.0, rng)) == 0


def test_ppp_mean_count():
    rng = np.random.default_rng(7)
    counts = [len(sample_ppp(0.03, R_DEFAULT, rng)) for _ in range(100_000)]
    assert np.mean(counts) == pytest.approx(3.0, rel=0.01)


def test_ppp_deterministic_and_inside_disk():
    a = sample_ppp(0.5, 4.0, np.random.default_rng(3))
    b = sample_ppp(0.5, 4.0, np.random.default_rng(3))
    np.testing.assert_array_equal(a.coordinates, b.coordinates)
    assert np.all(a.distances <= 4.0)


@pytest.mark.parametrize("density,radius", [(float("inf"), 1.0), (1.0, float("nan")), (-1, 1.0)])
def test_ppp_rejects_bad_input(rng, density, radius):
    with pytest.raises(ParameterError):
        sample_ppp(density, radius, rng)


@pytest.mark.parametrize("d,expected", [(0.5, 1.0), (1.0, 1.0), (2.0, 0.0625), (0.0, 1.0)])
def test_path_loss_values(d, expected):
    assert path_loss(d, 4.0) == pytest.approx(expected)


@given(st.floats(0, 1e3), st.floats(2.01, 6))
def test_path_loss_range(d, alpha):
    v = path_loss(d, alpha)
    assert 0 < v <= 1 or d ** alpha == math.inf
    assert (v == 1.0) == (d <= 1.0) or v == pytest.approx(1.0)


def test_active_probability_default_point():
    # 1 - (1 + 0.001/(3.5*0.03))^-3.5
    assert active_probability(NetworkParams()) == pytest.approx(0.0326, abs=5e-5)


def test_active_probability_limits():
    assert active_probability(lambda_u=0.0, lambda_b=0.03) == 0.0
    assert active_probability(lambda_u=1e9, lambda_b=0.03) == pytest.approx(1.0)


@given(st.floats(1e-4, 1.0), st.floats(1e-3, 10.0))
def test_active_probability_monotone(lu, lb):
    p = active_probability(lambda_u=lu, lambda_b=lb)
    assert 0 < p < 1
    h = 1e-6 * lu
    assert active_probability(lambda_u=lu + h, lambda_b=lb) > p
    assert active_probability(lambda_u=lu, lambda_b=lb * 1.01) < p


def test_mean_field_interference_default_value():
    R = R_DEFAULT
    ring = 1 + (1 - R ** -2) / 2
    expected = (0.001 * math.pi * R) ** 2 * 0.03 ** -2 * ring
    assert mean_field_interference(NetworkParams()) == pytest.approx(expected, rel=1e-12)
    assert mean_field_interference(NetworkParams()) == pytest.approx(0.5181, abs=1e-4)


def test_mean_field_interference_scalings():
    base = mean_field_interference(NetworkParams())
    assert mean_field_interference(NetworkParams(n_antennas=2)) == pytest.approx(base / math.sqrt(2))
    assert mean_field_interference(NetworkParams(tx_power=3.0)) == pytest.approx(3 * base)


def test_empirical_interference_small_cases(rng):
    net = NetworkParams()
    assert empirical_interference(PointSet(np.zeros((0, 2)), 5.0), net, rng) == 0.0
    one = PointSet(np.array([[2.0, 0.0]]), 5.0)
    assert empirical_interference(one, net, rng, gains=np.ones(1)) == pytest.approx(0.0625)


def test_sinr_examples():
    assert sinr(1.0, 0.0, NetworkParams(noise_power=1.0)) == pytest.approx(1.0)
    assert NetworkParams().beam_width / (2 * math.pi) == pytest.approx(1.0)
    net4 = NetworkParams(n_antennas=4, noise_power=0.0)
    assert sinr(3.0, 1.5, net4) == pytest.approx(2 * 3.0 / 1.5)
    assert sinr(1.0, 0.0, NetworkParams(noise_power=0.0)) == math.inf


@pytest.mark.parametrize("z", [1e-8, 1e-3, 0.5, 0.999, 1.0, 1.001, 3.0, 40.0, 700.0])
def test_exp1_matches_scipy(z):
    assert exp1(z) == pytest.approx(special.exp1(z), rel=1e-12)
    assert scaled_exp1(z) == pytest.approx(special.exp1(z) * math.exp(z) if z < 700 else
                                           scaled_exp1_laguerre(z), rel=1e-10)


@pytest.mark.parametrize("z", [0.1, 1.0, 10.0, 100.0])
def test_exp1_laguerre_cross_check(z):
    # the quadrature is a coarse cross-check near the 1/(z+t) pole at small z
    assert scaled_exp1_laguerre(z) == pytest.approx(scaled_exp1(z), rel=1e-3)


def test_spectral_efficiency_limits_and_monotonicity():
    net = NetworkParams()
    assert spectral_efficiency(net, math.inf) == 0.0
    assert spectral_efficiency(net, 0.1) > spectral_efficiency(net, 0.2)
    assert log1p_exp_mean(2.0) > log1p_exp_mean(1.0)


def test_spectral_efficiency_mc_at_default_point():
    net = NetworkParams()
    mf = mean_field_interference(net)
    a = net.tx_power / (net.noise_power / (net.n_antennas * net.lambda_b ** 2) + mf)
    mc = spectral_efficiency_mc(a, 1_000_000, np.random.default_rng(5))
    assert spectral_efficiency(net) == pytest.approx(mc, rel=5e-3)


def test_spectral_efficiency_rejects_negative_interference():
    with pytest.raises(ParameterError):
        spectral_efficiency(NetworkParams(), -1.0)
