"""Backhaul barrier, storage cost, instantaneous cost and long-run-average cost."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CacheSpec, ContentSpec


def backhaul_cost(p, B: float, L: float):
    """-log(B - L p) below the barrier p < B/L, +inf at or beyond it."""
    p = np.asarray(p, dtype=float)
    slack = B - L * p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(slack > 0, -np.log(np.where(slack > 0, slack, 1.0)), np.inf)
    return out if out.ndim else float(out)


def storage_cost(q, cache: CacheSpec):
    q = np.asarray(q, dtype=float)
    out = cache.gamma * (cache.capacity_C - q) / cache.capacity_C
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CostBreakdown:
    backhaul_term: float | np.ndarray
    storage_term: float | np.ndarray
    replication_factor: float | np.ndarray
    se_divisor: float
    x: float | np.ndarray
    total: float | np.ndarray

    def recompute(self):
        with np.errstate(invalid="ignore"):
            return self.backhaul_term * self.replication_factor / (self.se_divisor * self.x) + self.storage_term


def instantaneous_cost(p, i_r, se: float, x, q, spec: ContentSpec, cache: CacheSpec) -> CostBreakdown:
    if se <= 0:
        raise ValueError("spectral efficiency must be > 0")
    if np.any(np.asarray(i_r) < 0):
        raise ValueError("replication level must be >= 0")
    phi = backhaul_cost(p, cache.backhaul_B, spec.size_L)
    psi = storage_cost(q, cache)
    factor = 1.0 + np.asarray(i_r, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        # 0 * inf stays 0 only when phi is finite; an infinite barrier propagates
        total = phi * factor / (se * x) + psi
    if np.ndim(total) == 0:
        factor, x, total = float(factor), float(x), float(total)
    return CostBreakdown(phi, psi, factor, se, x, total)


@dataclass(frozen=True)
class TerminalCost:
    """Cost charged on the storage state at the end of the window.

    ``unused``: weight * (Q - knee * log(1 + Q/knee)); free storage left at
    the horizon is wasted. The marginal charge weight * Q / (Q + knee) ramps
    up to ``weight`` over a storage scale ``knee``; knee = 0 is the linear
    charge weight * Q.
    ``occupied``: weight * gamma * (C - Q) / C.
    ``none``: identically zero.
    """

    form: str = "unused"
    weight: float = 0.0
    knee: float = 0.0

    def __post_init__(self):
        if self.form not in ("none", "unused", "occupied"):
            raise ValueError(f"unknown terminal cost form {self.form!r}")
        if self.knee < 0:
            raise ValueError("knee must be >= 0")

    def __call__(self, q, cache: CacheSpec):
        q = np.asarray(q, dtype=float)
        if self.form == "unused":
            out = self.weight * q
            if self.knee > 0:
                out = out - self.weight * self.knee * np.log1p(q / self.knee)
        elif self.form == "occupied":
            out = self.weight * cache.gamma * (cache.capacity_C - q) / cache.capacity_C
        else:
            out = np.zeros_like(q)
        return out if out.ndim else float(out)

    def slope(self, q, cache: CacheSpec):
        """dkappa/dQ at storage ``q``."""
        q = np.asarray(q, dtype=float)
        if self.form == "unused":
            out = self.weight * (q / (q + self.knee) if self.knee > 0 else np.ones_like(q))
            return out if out.ndim else float(out)
        out = np.full(q.shape, -self.weight * cache.gamma / cache.capacity_C
                      if self.form == "occupied" else 0.0)
        return out if out.ndim else float(out)


ZERO_TERMINAL = TerminalCost("none", 0.0)


def lra_cost(t, totals, terminal: float = 0.0, axis: int = 0):
    """Trapezoidal integral of the instantaneous cost plus the terminal charge.

    ``totals`` may carry extra axes (runs, SBSs); any infinite step makes the
    corresponding integral infinite.
    """
    t = np.asarray(t, dtype=float)
    totals = np.asarray(totals, dtype=float)
    if totals.shape[axis] == 0:
        raise ValueError("empty trace")
    if totals.shape[axis] == 1:
        integral = np.zeros(np.delete(totals.shape, axis)) if totals.ndim > 1 else 0.0
    else:
        integral = np.trapezoid(totals, t, axis=axis)
    out = integral + np.asarray(terminal, dtype=float)
    return out if np.ndim(out) else float(out)
