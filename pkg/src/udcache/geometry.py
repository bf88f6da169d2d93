"""Stochastic-geometry layer of the ultra-dense network.

Point-process sampling inside a reception ball, the clamped path-loss
channel, the active-SBS probability, the mean-field (densification
normalized) interference and the spatially averaged spectral efficiency.

Every random quantity is drawn from an injected ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329


class ParameterError(ValueError):
    """Raised when a physical parameter is outside its admissible range."""


@dataclass(frozen=True)
class NetworkParams:
    lambda_b: float = 0.03
    lambda_u: float = 0.001
    radius_R: float = 10.0 / math.sqrt(math.pi)
    alpha: float = 4.0
    n_antennas: int = 1
    tx_power: float = 1.0
    noise_power: float = 1e-4

    def __post_init__(self):
        for name in ("lambda_b", "lambda_u", "radius_R", "alpha", "tx_power", "noise_power"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.lambda_b <= 0:
            raise ParameterError("lambda_b must be > 0")
        if self.lambda_u <= 0:
            raise ParameterError("lambda_u must be > 0")
        if self.radius_R <= 0:
            raise ParameterError("radius_R must be > 0")
        if self.alpha <= 2:
            raise ParameterError("alpha must be > 2 (mean-field interference diverges otherwise)")
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ParameterError("n_antennas must be a positive integer")
        if self.tx_power <= 0:
            raise ParameterError("tx_power must be > 0")
        if self.noise_power < 0:
            raise ParameterError("noise_power must be >= 0")
        if self.lambda_b < self.lambda_u:
            warnings.warn(
                f"lambda_b={self.lambda_b} < lambda_u={self.lambda_u}: not an ultra-dense regime",
                stacklevel=2,
            )

    @property
    def beam_width(self) -> float:
        return 2.0 * math.pi / math.sqrt(self.n_antennas)

    @property
    def mean_sbs_in_ball(self) -> float:
        return self.lambda_b * math.pi * self.radius_R**2


@dataclass(frozen=True)
class PointSet:
    coordinates: np.ndarray  # shape (n, 2)
    radius: float

    def __len__(self) -> int:
        return len(self.coordinates)

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.coordinates[:, 0], self.coordinates[:, 1])


def sample_ppp(density: float, radius: float, rng: np.random.Generator) -> PointSet:
    """Homogeneous PPP restricted to the origin-centred disk of the given radius."""
    if not (math.isfinite(density) and math.isfinite(radius)):
        raise ParameterError("density and radius must be finite")
    if density < 0 or radius <= 0:
        raise ParameterError("need density >= 0 and radius > 0")
    n = rng.poisson(density * math.pi * radius**2)
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    coords = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return PointSet(coords, float(radius))


def fading_gain(rng: np.random.Generator, size=None) -> np.ndarray | float:
    """|g|^2 under unit-mean Rayleigh fading, i.e. Exp(1)."""
    return rng.exponential(1.0, size)


def path_loss(distance, alpha: float):
    """min(1, d^-alpha); the clamp makes d = 0 well defined."""
    d = np.asarray(distance, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.minimum(1.0, np.where(d > 0, d, 1.0) ** (-alpha))
    out = np.where(d > 0, out, 1.0)
    return out if out.ndim else float(out)


def active_probability(net: NetworkParams | None = None, *, lambda_u: float | None = None,
                       lambda_b: float | None = None) -> float:
    """Probability that an SBS has at least one associated user."""
    lu = net.lambda_u if lambda_u is None else lambda_u
    lb = net.lambda_b if lambda_b is None else lambda_b
    return 1.0 - (1.0 + lu / (3.5 * lb)) ** (-3.5)


def mean_field_interference(net: NetworkParams, fading_mean: float = 1.0) -> float:
    """Interference normalized by SBS density and antenna count (deterministic UDN limit)."""
    a = net.alpha
    if a <= 2:
        raise ParameterError("alpha must be > 2")
    R = net.radius_R
    ring = 1.0 + (1.0 - R ** (2.0 - a)) / (a - 2.0)
    return ((net.lambda_u * math.pi * R) ** 2 * net.n_antennas**-0.5
            * net.lambda_b ** (-a / 2.0) * ring * net.tx_power * fading_mean)


def empirical_interference(points: PointSet, net: NetworkParams, rng: np.random.Generator,
                           gains: np.ndarray | None = None) -> float:
    """Aggregate interference at the origin from the given (already thinned) active SBSs.

    ``gains`` overrides the fresh Exp(1) fading draws.
    """
    if len(points) == 0:
        return 0.0
    g = fading_gain(rng, len(points)) if gains is None else np.asarray(gains, dtype=float)
    return float(np.sum(net.tx_power * path_loss(points.distances, net.alpha) * g))


def interference_normalization(net: NetworkParams) -> float:
    """Factor N_a^{-1/2} lambda_b^{-alpha/2} that the mean-field interference carries."""
    return net.n_antennas**-0.5 * net.lambda_b ** (-net.alpha / 2.0)


def sample_interference(net: NetworkParams, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized draws of the raw aggregate interference (active SBSs at p_a*lambda_b)."""
    density = active_probability(net) * net.lambda_b
    R = net.radius_R
    counts = rng.poisson(density * math.pi * R**2, size=n_draws)
    total = int(counts.sum())
    r = R * np.sqrt(rng.random(total))
    g = fading_gain(rng, total)
    contrib = net.tx_power * path_loss(r, net.alpha) * g
    owner = np.repeat(np.arange(n_draws), counts)
    return np.bincount(owner, weights=contrib, minlength=n_draws)


def sinr(signal, interference, net: NetworkParams):
    """Directional-beam SINR; returns inf when both noise and interference vanish."""
    signal = np.asarray(signal, dtype=float)
    interference = np.asarray(interference, dtype=float)
    if np.any(signal < 0) or np.any(interference < 0):
        raise ParameterError("signal and interference must be non-negative")
    beam = net.beam_width / (2.0 * math.pi)
    denom = net.noise_power + beam * net.n_antennas * interference
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, net.n_antennas * signal / np.where(denom > 0, denom, 1.0), np.inf)
    return out if out.ndim else float(out)


# -- exponential integral ----------------------------------------------------

def _e1_series(z: np.ndarray) -> np.ndarray:
    term = np.ones_like(z)
    acc = np.zeros_like(z)
    for k in range(1, 60):
        term = term * (-z) / k
        acc += term / k
    return -EULER_GAMMA - np.log(z) - acc


def _scaled_e1_cf(z: np.ndarray, max_iter: int = 500, eps: float = 1e-16) -> np.ndarray:
    # modified Lentz evaluation of exp(z) E1(z)
    tiny = 1e-300
    b = z + 1.0
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, max_iter):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < eps):
            break
    return h


def scaled_exp1(z):
    """exp(z) * E1(z) for z > 0: series below 1, continued fraction above."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ParameterError("E1 argument must be > 0")
    flat = np.atleast_1d(z).astype(float)
    out = np.empty_like(flat)
    small = flat <= 1.0
    if small.any():
        out[small] = np.exp(flat[small]) * _e1_series(flat[small])
    if (~small).any():
        out[~small] = _scaled_e1_cf(flat[~small])
    return out.reshape(z.shape) if z.ndim else float(out[0])


def exp1(z):
    return np.exp(-np.asarray(z, dtype=float)) * scaled_exp1(z)


def scaled_exp1_laguerre(z, n_nodes: int = 64):
    """Gauss-Laguerre cross-check: exp(z) E1(z) = int_0^inf e^{-t} / (t + z) dt."""
    t, w = np.polynomial.laguerre.laggauss(n_nodes)
    z = np.asarray(z, dtype=float)
    return np.sum(w / (t + z[..., None]), axis=-1)


def log1p_exp_mean(a):
    """E[log(1 + a X)] for X ~ Exp(1), via exp(1/a) E1(1/a)."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ParameterError("effective SNR a must be > 0")
    out = scaled_exp1(1.0 / a)
    return out if np.ndim(out) else float(out)


def effective_snr(net: NetworkParams, mf_interference: float) -> float:
    denom = net.noise_power / (net.n_antennas * net.lambda_b ** (net.alpha / 2.0)) + mf_interference
    if denom <= 0:
        raise ParameterError("noise plus interference must be positive")
    return net.tx_power / denom


def spectral_efficiency(net: NetworkParams, mf_interference: float | None = None) -> float:
    """Average downlink SE in nats/channel use with unit serving path loss.

    Returns 0 for infinite interference.
    """
    if mf_interference is None:
        mf_interference = mean_field_interference(net)
    if mf_interference < 0:
        raise ParameterError("mf_interference must be >= 0")
    if math.isinf(mf_interference):
        return 0.0
    a = effective_snr(net, mf_interference)
    return float(log1p_exp_mean(a))


def spectral_efficiency_mc(a: float, n_draws: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of E[log(1 + a X)], X ~ Exp(1)."""
    return float(np.mean(np.log1p(a * rng.exponential(1.0, n_draws))))
