"""Popularity SDE and storage ODE with Euler-Maruyama integration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ParameterError

X_MIN = 0.01
X_MAX = 0.99


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class ContentSpec:
    u: float = 0.1
    a: float = 0.15
    eta: float = 0.1
    size_L: float = 1.0
    n_similar: int | float = 20
    x0: float = 0.3

    def __post_init__(self):
        if self.eta < 0:
            raise ParameterError("eta must be >= 0")
        if self.size_L <= 0:
            raise ParameterError("size_L must be > 0")
        # n_similar = inf is the limit in which the replication interaction vanishes
        if self.n_similar != math.inf and (int(self.n_similar) != self.n_similar or self.n_similar < 1):
            raise ParameterError("n_similar must be a positive integer or inf")
        if not 0.0 < self.x0 < 1.0:
            raise ParameterError("x0 must lie in (0, 1)")

    @property
    def drift(self) -> float:
        return self.u - self.a

    @property
    def diffusion(self) -> float:
        return 0.5 * self.eta**2

    @property
    def is_static(self) -> bool:
        return self.eta == 0 and self.u == self.a


@dataclass(frozen=True)
class CacheSpec:
    capacity_C: float = 1.0
    discard_mu: float = 0.1
    gamma: float = 0.01
    backhaul_B: float = 1.0
    q0: float = 0.7
    q0_std: float = 0.05

    def __post_init__(self):
        if self.capacity_C <= 0:
            raise ParameterError("capacity_C must be > 0")
        if self.discard_mu < 0:
            raise ParameterError("discard_mu must be >= 0")
        if self.backhaul_B <= 0:
            raise ParameterError("backhaul_B must be > 0")
        if not 0.0 <= self.q0 <= self.capacity_C:
            raise ParameterError("q0 must lie in [0, capacity_C]")
        if self.q0_std < 0:
            raise ParameterError("q0_std must be >= 0")

    def p_max(self, size_L: float) -> float:
        """Largest admissible caching probability, kept strictly below the backhaul barrier."""
        ratio = self.backhaul_B / size_L
        return min(1.0, ratio - 1e-3 * ratio)

    def scaled(self, factor: float) -> "CacheSpec":
        """Same cache with capacity and initial storage scaled by ``factor``."""
        return CacheSpec(self.capacity_C * factor, self.discard_mu, self.gamma,
                         self.backhaul_B, self.q0 * factor, self.q0_std * factor)


def reflect(x, lo: float = X_MIN, hi: float = X_MAX):
    """Fold excursions back into [lo, hi] (mirror at each bound, repeated)."""
    x = np.asarray(x, dtype=float)
    width = hi - lo
    y = np.mod(x - lo, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    out = lo + y
    return out if out.ndim else float(out)


def popularity_step(x, spec: ContentSpec, dt: float, noise=0.0,
                    bounds: tuple[float, float] = (X_MIN, X_MAX)):
    if dt <= 0:
        raise ParameterError("dt must be > 0")
    x_new = np.asarray(x, dtype=float) + spec.drift * dt + spec.eta * math.sqrt(dt) * np.asarray(noise)
    return reflect(x_new, *bounds)


def storage_step(q, p, spec: ContentSpec, cache: CacheSpec, dt: float):
    if dt <= 0:
        raise ParameterError("dt must be > 0")
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ContractViolation("caching probability outside [0, 1]")
    out = np.clip(np.asarray(q, dtype=float) + (cache.discard_mu - spec.size_L * p) * dt,
                  0.0, cache.capacity_C)
    return out if out.ndim else float(out)


@dataclass
class StateTrace:
    """Per-content trajectory; arrays have shape (n_steps + 1, n_contents)."""

    t: np.ndarray
    x: np.ndarray
    q: np.ndarray
    p: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)


def simulate_trajectory(specs, cache: CacheSpec, policy, horizon: float, n_steps: int,
                        rng: np.random.Generator, q0=None) -> StateTrace:
    """Advance popularity and storage jointly, querying ``policy.decide(t, x, q)`` each step.

    ``policy`` may also be a plain callable ``(t, x, q) -> p``.
    """
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    specs = list(specs)
    decide = getattr(policy, "decide", policy)
    dt = horizon / n_steps
    m = len(specs)
    t = np.linspace(0.0, horizon, n_steps + 1)
    x = np.empty((n_steps + 1, m))
    q = np.empty((n_steps + 1, m))
    p = np.empty((n_steps + 1, m))
    x[0] = [s.x0 for s in specs]
    q[0] = cache.q0 if q0 is None else q0
    noise = rng.standard_normal((n_steps, m))
    for n in range(n_steps + 1):
        for j, spec in enumerate(specs):
            pj = float(decide(t[n], x[n, j], q[n, j]))
            if not 0.0 <= pj <= 1.0:
                raise ContractViolation(f"policy returned p={pj} at step {n} (content {j})")
            p[n, j] = pj
        if n == n_steps:
            break
        for j, spec in enumerate(specs):
            x[n + 1, j] = popularity_step(x[n, j], spec, dt, noise[n, j])
            q[n + 1, j] = storage_step(q[n, j], p[n, j], spec, cache, dt)
    return StateTrace(t, x, q, p)
