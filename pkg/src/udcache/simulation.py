"""Monte Carlo network simulation under a caching policy.

One run is a reception ball holding ``n_sbs`` SBSs. The request probability
path is shared by every SBS (demand is network wide); storage paths are per
SBS and start from i.i.d. draws of the initial storage distribution.
Random numbers come from separate streams per purpose, so two policies run
with the same seed see identical popularity paths, initial storage and
placement draws (common random numbers).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .costs import ZERO_TERMINAL, TerminalCost, backhaul_cost, storage_cost
from .dynamics import CacheSpec, ContentSpec, ContractViolation, popularity_step, reflect
from .geometry import NetworkParams, ParameterError, spectral_efficiency

log = logging.getLogger(__name__)

_STREAMS = ("popularity", "initial_storage", "placement", "policy")


@dataclass
class SimConfig:
    net: NetworkParams = field(default_factory=NetworkParams)
    content: ContentSpec = field(default_factory=ContentSpec)
    cache: CacheSpec = field(default_factory=CacheSpec)
    terminal: TerminalCost = ZERO_TERMINAL
    n_sbs: int = 3
    n_runs: int = 1000
    horizon: float = 2.0
    n_steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_sbs < 1:
            raise ParameterError("n_sbs must be >= 1")
        if self.n_runs < 1:
            raise ParameterError("n_runs must be >= 1")
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if self.horizon <= 0:
            raise ParameterError("horizon must be > 0")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def streams(self) -> dict[str, np.random.Generator]:
        children = np.random.SeedSequence(self.seed).spawn(len(_STREAMS))
        return {name: np.random.Generator(np.random.PCG64(s)) for name, s in zip(_STREAMS, children)}


@dataclass
class CacheStateMatrix:
    """Per-SBS, per-content occupied and remaining storage."""

    occupied: np.ndarray
    remaining: np.ndarray
    capacity: float

    @classmethod
    def from_remaining(cls, remaining, capacity: float) -> "CacheStateMatrix":
        remaining = np.asarray(remaining, dtype=float)
        return cls(capacity - remaining, remaining, capacity)

    def conserved(self, atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.occupied + self.remaining - self.capacity) <= atol))


@dataclass(frozen=True)
class ReplicationReport:
    replicated_amount: float
    storage_usage: float

    @property
    def ratio(self) -> float:
        return self.replicated_amount / self.storage_usage if self.storage_usage > 0 else 0.0


def count_replication(holdings) -> ReplicationReport:
    """Content held beyond one best copy, per content, summed.

    ``holdings`` is an (n_sbs, n_contents) array of cached amounts or a
    CacheStateMatrix (its occupied amounts are used).
    """
    if isinstance(holdings, CacheStateMatrix):
        holdings = holdings.occupied
    h = np.asarray(holdings, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    total = h.sum(axis=0)
    replicated = np.maximum(0.0, total - h.max(axis=0))
    return ReplicationReport(float(replicated.sum()), float(total.sum()))


@dataclass(frozen=True)
class CostReport:
    policy: str
    mean: float
    std: float
    ci_low: float
    ci_high: float
    n_runs: int
    barrier_violations: int = 0

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass
class SimResult:
    lra: np.ndarray                 # (n_runs,) mean LRA over the SBSs of each run
    lra_per_sbs: np.ndarray         # (n_runs, n_sbs)
    replicated: np.ndarray          # (n_runs,) placed content beyond one copy, summed over epochs
    usage: np.ndarray               # (n_runs,) placed content, summed over epochs
    x_paths: np.ndarray | None = None
    q_paths: np.ndarray | None = None
    p_paths: np.ndarray | None = None
    cost_paths: np.ndarray | None = None

    def replication(self) -> ReplicationReport:
        return ReplicationReport(float(self.replicated.sum()), float(self.usage.sum()))


def initial_storage(cfg: SimConfig, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws from the initial storage law truncated to [0, C]."""
    c = cfg.cache
    if c.q0_std == 0:
        return np.full(u.shape, c.q0)
    a, b = (0.0 - c.q0) / c.q0_std, (c.capacity_C - c.q0) / c.q0_std
    return stats.truncnorm.ppf(u, a, b, loc=c.q0, scale=c.q0_std)


def simulate_network(cfg: SimConfig, policy, se: float | None = None, keep_paths: bool = False,
                     ) -> SimResult:
    """Run ``cfg.n_runs`` independent reception balls under one shared policy."""
    spec, cache = cfg.content, cfg.cache
    if se is None:
        se = spectral_efficiency(cfg.net)
    streams = cfg.streams()
    if getattr(policy, "kind", None) == "random":
        policy.rng = streams["policy"]
    decide = getattr(policy, "decide", policy)
    R, K, N = cfg.n_runs, cfg.n_sbs, cfg.n_steps
    dt = cfg.dt
    noise = streams["popularity"].standard_normal((N, R))
    q = initial_storage(cfg, streams["initial_storage"].random((R, K)))
    x = np.full(R, spec.x0)
    x = reflect(x)
    placement = streams["placement"]
    norm = cache.capacity_C * spec.n_similar
    integral = np.zeros((R, K))
    replicated = np.zeros(R)
    usage = np.zeros(R)
    paths = None
    if keep_paths:
        paths = dict(x=np.empty((N + 1, R)), q=np.empty((N + 1, R, K)), p=np.empty((N + 1, R, K)),
                     c=np.empty((N + 1, R, K)))
    for n in range(N + 1):
        t = n * dt
        p = np.asarray(decide(t, np.broadcast_to(x[:, None], (R, K)), q), dtype=float)
        p = np.broadcast_to(p, (R, K))
        bad = (p < 0) | (p > 1) | ~np.isfinite(p)
        if bad.any():
            r, k = np.argwhere(bad)[0]
            raise ContractViolation(f"policy returned p={p[r, k]} at run {r}, sbs {k}, step {n}")
        i_r = 0.0 if math.isinf(norm) else (p.sum(axis=1, keepdims=True) - p) / norm
        with np.errstate(invalid="ignore"):
            cost = backhaul_cost(p, cache.backhaul_B, spec.size_L) * (1.0 + i_r) / (se * x[:, None]) \
                + storage_cost(q, cache)
        weight = 0.5 * dt if n in (0, N) else dt
        integral += weight * cost
        placed = spec.size_L * (placement.random((R, K)) < p)
        total = placed.sum(axis=1)
        replicated += total - placed.max(axis=1)
        usage += total
        if keep_paths:
            paths["x"][n], paths["q"][n], paths["p"][n], paths["c"][n] = x, q, p, cost
        if n == N:
            break
        x = popularity_step(x, spec, dt, noise[n])
        q = np.clip(q + (cache.discard_mu - spec.size_L * p) * dt, 0.0, cache.capacity_C)
    lra_k = integral + cfg.terminal(q, cache)
    result = SimResult(lra_k.mean(axis=1), lra_k, replicated, usage)
    if keep_paths:
        result.x_paths, result.q_paths = paths["x"], paths["q"]
        result.p_paths, result.cost_paths = paths["p"], paths["c"]
    return result


def cost_report(name: str, lra: np.ndarray) -> CostReport:
    lra = np.asarray(lra, dtype=float)
    finite = np.isfinite(lra)
    violations = int((~finite).sum())
    if violations:
        warnings.warn(f"{name}: {violations} runs hit the backhaul barrier; excluded from the mean",
                      stacklevel=2)
    vals = lra[finite]
    n = len(vals)
    if n < 2:
        raise ParameterError("need at least two finite runs for an interval")
    mean = float(vals.mean())
    std = float(vals.std(ddof=1))
    half = 1.959963984540054 * std / math.sqrt(n)
    return CostReport(name, mean, std, mean - half, mean + half, n, violations)


def estimate_lra(cfg: SimConfig, policy, se: float | None = None, name: str | None = None) -> CostReport:
    if cfg.n_runs < 2:
        raise ParameterError("estimate_lra needs n_runs >= 2")
    res = simulate_network(cfg, policy, se)
    return cost_report(name or getattr(policy, "kind", "policy"), res.lra)
