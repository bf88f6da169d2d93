"""Caching policies compared in the experiments.

All policies expose ``decide(t, x, q)`` and accept numpy arrays for ``x``
and ``q`` (broadcast together); ``t`` is a scalar time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .solver import MfeSolution


class PolicyError(ValueError):
    pass


class Policy:
    kind = "base"
    p_max = 1.0

    def decide(self, t, x, q):
        raise NotImplementedError

    def __call__(self, t, x, q):
        return self.decide(t, x, q)


@dataclass
class ConstantPolicy(Policy):
    value: float
    p_max: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not 0.0 <= self.value <= self.p_max:
            raise PolicyError(f"constant {self.value} outside [0, {self.p_max}]")

    def decide(self, t, x, q):
        shape = np.broadcast(np.asarray(x), np.asarray(q)).shape
        out = np.full(shape, self.value)
        return out if shape else float(out)


@dataclass
class PopularityPolicy(Policy):
    """Caches in proportion to the current request probability."""

    p_max: float = 1.0
    scale: float = 1.0
    kind = "popularity"

    def decide(self, t, x, q):
        x = np.broadcast_to(np.asarray(x, dtype=float), np.broadcast(np.asarray(x), np.asarray(q)).shape)
        out = np.clip(self.scale * x, 0.0, self.p_max)
        return out if out.ndim else float(out)


@dataclass
class RandomPolicy(Policy):
    """Uniform on [0, p_max], drawn afresh on every call."""

    rng: np.random.Generator
    p_max: float = 1.0
    kind = "random"

    def __post_init__(self):
        if not 0.0 <= self.p_max <= 1.0:
            raise PolicyError("p_max must lie in [0, 1]")

    def decide(self, t, x, q):
        shape = np.broadcast(np.asarray(x), np.asarray(q)).shape
        out = self.rng.random(shape) * self.p_max
        return out if shape else float(out)


def random_policy(rng: np.random.Generator, p_max: float) -> RandomPolicy:
    return RandomPolicy(rng, p_max)


@dataclass
class MeanFieldPolicy(Policy):
    """Trilinear interpolation of the equilibrium policy field over (t, x, Q).

    Queries outside the lattice are clamped to the nearest node and counted in
    ``out_of_grid``.
    """

    solution: MfeSolution
    out_of_grid: int = field(default=0, init=False)
    kind = "mf"

    def __post_init__(self):
        if not self.solution.converged:
            raise PolicyError("mean-field policy needs a converged equilibrium")
        self.p_max = self.solution.p_max
        g = self.solution.grid
        self._axes = (g.t, g.x, g.q)

    def decide(self, t, x, q):
        x, q = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(q, dtype=float))
        field_ = self.solution.policy
        idx, frac = [], []
        for axis, val in zip(self._axes, (np.full(x.shape, float(t)), x, q)):
            lo, hi = axis[0], axis[-1]
            tol = 1e-9 * (hi - lo)
            outside = (val < lo - tol) | (val > hi + tol)
            self.out_of_grid += int(np.count_nonzero(outside))
            v = np.clip(val, lo, hi)
            pos = (v - lo) / (axis[1] - axis[0])
            i = np.minimum(np.floor(pos).astype(int), len(axis) - 2)
            idx.append(i)
            frac.append(pos - i)
        (i, j, k), (a, b, c) = idx, frac
        out = np.zeros(x.shape)
        for di, wa in ((0, 1 - a), (1, a)):
            for dj, wb in ((0, 1 - b), (1, b)):
                for dk, wc in ((0, 1 - c), (1, c)):
                    out += wa * wb * wc * field_[i + di, j + dj, k + dk]
        out = np.clip(out, 0.0, self.p_max)
        return out if out.ndim else float(out)


def mf_policy(solution: MfeSolution) -> MeanFieldPolicy:
    return MeanFieldPolicy(solution)


def candidate_grid(delta: float, p_max: float) -> np.ndarray:
    if delta <= 0:
        raise PolicyError("delta must be > 0")
    n = int(np.floor(p_max / delta + 1e-9)) + 1
    return np.round(np.arange(n) * delta, 12)


def exhaustive_search(candidates, estimator):
    """Best constant policy by explicit enumeration.

    ``estimator(value) -> float`` returns the LRA of the constant policy; the
    caller is responsible for common random numbers. Ties go to the smaller p.
    Returns (best_value, table) with the table sorted by p.
    """
    values = sorted(float(c) for c in candidates)
    if not values:
        raise PolicyError("empty candidate set")
    table = [(c, float(estimator(c))) for c in values]
    best = min(table, key=lambda row: (row[1], row[0]))
    return best[0], table
