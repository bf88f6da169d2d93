"""Mean-field equilibrium solver for the per-content caching game.

The state lattice is (t, x, Q): time, request probability and remaining
storage. The value function is swept backward with an explicit upwind
scheme, the density forward with the transpose of the same generator
(so mass is conserved to round-off), and the two are coupled through the
replication level and the closed-form optimal caching probability.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .costs import ZERO_TERMINAL, TerminalCost, backhaul_cost, storage_cost
from .dynamics import X_MAX, X_MIN, CacheSpec, ContentSpec, ContractViolation

log = logging.getLogger(__name__)

EPS_V = 1e-8
CFL_LIMIT = 0.9


class GridError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


class SchemeError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    horizon_T: float = 2.0
    n_t: int = 200
    x_bounds: tuple[float, float] = (X_MIN, X_MAX)
    n_x: int = 41
    q_bounds: tuple[float, float] | None = None  # None -> [0, C]
    n_q: int = 51

    def __post_init__(self):
        if min(self.n_t, self.n_x, self.n_q) < 2:
            raise GridError("n_t, n_x and n_q must all be >= 2")
        if self.horizon_T <= 0:
            raise GridError("horizon_T must be > 0")
        lo, hi = self.x_bounds
        if not 0 < lo < hi:
            raise GridError("x_bounds must satisfy 0 < x_min < x_max")
        if self.q_bounds is not None and not self.q_bounds[0] < self.q_bounds[1]:
            raise GridError("q_bounds must be ordered")


@dataclass(frozen=True)
class Grid:
    spec: GridSpec
    t: np.ndarray
    x: np.ndarray
    q: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.t), len(self.x), len(self.q)

    def cfl_number(self, drift_x: float, drift_q: float, diffusion: float) -> float:
        return self.dt * (abs(drift_x) / self.dx + abs(drift_q) / self.dq + 2.0 * diffusion / self.dx**2)


def build_grid(spec: GridSpec, capacity_C: float | None = None, *, drift_x: float = 0.0,
               drift_q: float = 0.0, diffusion: float = 0.0, cfl: float = CFL_LIMIT) -> Grid:
    """Uniform lattice; raises GridError when the explicit scheme would be unstable.

    ``diffusion`` is the coefficient eta^2/2 of the second x-derivative.
    """
    q_bounds = spec.q_bounds
    if q_bounds is None:
        if capacity_C is None:
            raise GridError("q_bounds unset and no capacity given")
        q_bounds = (0.0, capacity_C)
    grid = Grid(
        spec,
        np.linspace(0.0, spec.horizon_T, spec.n_t),
        np.linspace(*spec.x_bounds, spec.n_x),
        np.linspace(*q_bounds, spec.n_q),
    )
    number = grid.cfl_number(drift_x, drift_q, diffusion)
    if number > cfl:
        parts = {
            "dx (advection)": abs(drift_x) / grid.dx,
            "dQ (advection)": abs(drift_q) / grid.dq,
            "dx (diffusion)": 2.0 * diffusion / grid.dx**2,
        }
        worst = max(parts, key=parts.get)
        raise GridError(
            f"explicit scheme unstable: dt*(...)={number:.3f} > {cfl}; dominated by {worst}, "
            f"dt={grid.dt:.4g} dx={grid.dx:.4g} dQ={grid.dq:.4g}")
    return grid


def grid_for(spec: ContentSpec, cache: CacheSpec, grid_spec: GridSpec, static: bool = False) -> Grid:
    p_max = cache.p_max(spec.size_L)
    drift_q = max(cache.discard_mu, abs(cache.discard_mu - spec.size_L * p_max))
    return build_grid(grid_spec, cache.capacity_C,
                      drift_x=0.0 if static else spec.drift, drift_q=drift_q,
                      diffusion=0.0 if static else spec.diffusion)


# -- closed-form control -----------------------------------------------------

def optimal_control(dv_dq, i_r, se: float, x, spec: ContentSpec, cache: CacheSpec):
    """Water-filling caching probability for a given storage sensitivity of the value.

    Non-positive (below EPS_V) sensitivities give 0: the minimized expression is
    then increasing in p.
    """
    scale = (1.0 + np.asarray(i_r, dtype=float)) / (se * np.asarray(x, dtype=float))
    out = _control(np.asarray(dv_dq, dtype=float), scale, spec, cache)
    return out if np.ndim(out) else float(out)


def optimal_control_high_storage(i_r, se: float, x, gamma_hat: float, spec: ContentSpec,
                                 cache: CacheSpec):
    """Storage-independent control of the large-capacity limit (constant sensitivity)."""
    if gamma_hat <= 0:
        raise ValueError("gamma_hat must be > 0")
    return optimal_control(gamma_hat, i_r, se, x, spec, cache)


def _control(dv, scale, spec: ContentSpec, cache: CacheSpec):
    L, B = spec.size_L, cache.backhaul_B
    safe = np.where(dv > EPS_V, dv, 1.0)
    p = np.maximum(0.0, B - scale / safe) / L
    p = np.clip(p, 0.0, cache.p_max(L))
    return np.where(dv > EPS_V, p, 0.0)


# -- generator ---------------------------------------------------------------

@dataclass
class _Rates:
    up_q: np.ndarray
    down_q: np.ndarray
    up_x: np.ndarray | float
    down_x: np.ndarray | float


def _rates(p: np.ndarray, spec: ContentSpec, cache: CacheSpec, grid: Grid, static: bool) -> _Rates:
    b = cache.discard_mu - spec.size_L * p
    up_q = np.maximum(b, 0.0) / grid.dq
    down_q = np.maximum(-b, 0.0) / grid.dq
    # clamped storage: no transition leaves [0, C]
    up_q[:, -1] = 0.0
    down_q[:, 0] = 0.0
    if static:
        return _Rates(up_q, down_q, 0.0, 0.0)
    nx = p.shape[0]
    diff = spec.diffusion / grid.dx**2
    up_x = np.full(nx, max(spec.drift, 0.0) / grid.dx + diff)
    down_x = np.full(nx, max(-spec.drift, 0.0) / grid.dx + diff)
    # reflecting popularity bounds
    up_x[-1] = 0.0
    down_x[0] = 0.0
    return _Rates(up_q, down_q, up_x[:, None], down_x[:, None])


def _apply_generator(v: np.ndarray, r: _Rates) -> np.ndarray:
    out = np.zeros_like(v)
    dq = np.diff(v, axis=1)
    out[:, :-1] += r.up_q[:, :-1] * dq
    out[:, 1:] -= r.down_q[:, 1:] * dq
    if not np.isscalar(r.up_x):
        dx = np.diff(v, axis=0)
        out[:-1, :] += (r.up_x[:-1] * dx)
        out[1:, :] -= (r.down_x[1:] * dx)
    return out


def _apply_adjoint(m: np.ndarray, r: _Rates) -> np.ndarray:
    """Transpose of the generator: net probability flow into each node."""
    out = -(r.up_q + r.down_q) * m
    out[:, 1:] += (r.up_q * m)[:, :-1]
    out[:, :-1] += (r.down_q * m)[:, 1:]
    if not np.isscalar(r.up_x):
        out -= (r.up_x + r.down_x) * m
        out[1:, :] += (r.up_x * m)[:-1, :]
        out[:-1, :] += (r.down_x * m)[1:, :]
    return out


def _select_control(v: np.ndarray, scale: np.ndarray, spec: ContentSpec, cache: CacheSpec, grid: Grid):
    """Upwind choice of the storage derivative and the matching control.

    Returns (p, dv_dq_used). Interior nodes take the one-sided difference on the
    side the induced storage drift points to; if neither side is consistent the
    drift is held at zero (p = mu/L). Edge nodes use their interior stencil.
    """
    mu, L, B = cache.discard_mu, spec.size_L, cache.backhaul_B
    d = np.diff(v, axis=1) / grid.dq
    fwd = np.concatenate([d, d[:, -1:]], axis=1)
    bwd = np.concatenate([d[:, :1], d], axis=1)
    p_f = _control(fwd, scale, spec, cache)
    p_b = _control(bwd, scale, spec, cache)
    b_f = mu - L * p_f
    b_b = mu - L * p_b
    use_f = b_f > 0
    use_b = b_b < 0
    h_f = scale * backhaul_cost(p_f, B, L) + b_f * fwd
    h_b = scale * backhaul_cost(p_b, B, L) + b_b * bwd
    pick_f = use_f & (~use_b | (h_f <= h_b))
    pick_b = use_b & ~pick_f
    p0 = min(max(mu / L, 0.0), cache.p_max(L))
    dv0 = scale / (B - L * p0)
    p = np.where(pick_f, p_f, np.where(pick_b, p_b, p0))
    dv = np.where(pick_f, fwd, np.where(pick_b, bwd, dv0))
    p[:, 0], dv[:, 0] = p_f[:, 0], fwd[:, 0]
    p[:, -1], dv[:, -1] = p_b[:, -1], bwd[:, -1]
    return p, dv


# -- sweeps ------------------------------------------------------------------

def _scale(i_r: float, se: float, grid: Grid) -> np.ndarray:
    return ((1.0 + i_r) / (se * grid.x))[:, None]


def hjb_backward(grid: Grid, i_r_path, se: float, spec: ContentSpec, cache: CacheSpec,
                 terminal: TerminalCost = ZERO_TERMINAL, static: bool = False,
                 running_cost: bool = True):
    """Backward sweep. Returns (value, policy, dv_dq), each shaped (n_t, n_x, n_q).

    ``running_cost=False`` drops both the backhaul and the storage terms (used
    for degenerate consistency checks).
    """
    nt, nx, nq = grid.shape
    i_r_path = np.broadcast_to(np.asarray(i_r_path, dtype=float), (nt,))
    value = np.empty((nt, nx, nq))
    policy = np.empty((nt, nx, nq))
    dv_dq = np.empty((nt, nx, nq))
    psi = storage_cost(grid.q, cache)[None, :] if running_cost else 0.0
    dt = grid.dt
    v = np.broadcast_to(np.asarray(terminal(grid.q, cache), dtype=float), (nx, nq)).copy()
    value[-1] = v
    policy[-1], dv_dq[-1] = _select_control(v, _scale(i_r_path[-1], se, grid), spec, cache, grid)
    for n in range(nt - 2, -1, -1):
        scale = _scale(i_r_path[n], se, grid)
        p, dv = _select_control(v, scale, spec, cache, grid)
        rates = _rates(p, spec, cache, grid, static)
        cost = scale * backhaul_cost(p, cache.backhaul_B, spec.size_L) + psi if running_cost else 0.0
        v = v + dt * (cost + _apply_generator(v, rates))
        if not np.all(np.isfinite(v)):
            raise DivergenceError(f"non-finite value at time step {n}")
        value[n], policy[n], dv_dq[n] = v, p, dv
    return value, policy, dv_dq


def fpk_forward(grid: Grid, policy: np.ndarray, spec: ContentSpec, cache: CacheSpec,
                m0: np.ndarray, static: bool = False):
    """Forward sweep of the density under ``policy``. Returns (density, per-step mass drift)."""
    nt = grid.shape[0]
    cell = grid.dx * grid.dq
    density = np.empty(grid.shape)
    density[0] = m = np.asarray(m0, dtype=float)
    mass_steps = np.zeros(nt - 1)
    dt = grid.dt
    for n in range(nt - 1):
        rates = _rates(policy[n], spec, cache, grid, static)
        m_new = m + dt * _apply_adjoint(m, rates)
        if m_new.min() < -1e-12:
            raise SchemeError(f"negative density {m_new.min():.3g} at step {n}")
        mass_steps[n] = (m_new.sum() - m.sum()) * cell
        density[n + 1] = m = m_new
    return density, mass_steps


def replication_functional(m: np.ndarray, p: np.ndarray, spec: ContentSpec, cache: CacheSpec,
                           grid: Grid) -> float | np.ndarray:
    """Mean-field replication level; accepts one time slice or a full (n_t, ...) stack."""
    if math.isinf(spec.n_similar):
        return np.zeros(m.shape[0]) if m.ndim == 3 else 0.0
    integral = (m * p).sum(axis=(-2, -1)) * grid.dx * grid.dq
    return integral / (cache.capacity_C * spec.n_similar)


def initial_density(grid: Grid, spec: ContentSpec, cache: CacheSpec) -> np.ndarray:
    """Point mass at x0 (split between the bracketing nodes) times a truncated normal in Q."""
    q = grid.q
    if cache.q0_std > 0:
        fq = stats.norm.pdf(q, cache.q0, cache.q0_std)
    else:
        fq = np.zeros_like(q)
        fq[np.argmin(np.abs(q - cache.q0))] = 1.0
    if fq.sum() == 0:
        raise ValueError("initial storage distribution has no mass on the grid")
    fq = fq / (fq.sum() * grid.dq)
    wx = np.zeros(len(grid.x))
    x0 = min(max(spec.x0, grid.x[0]), grid.x[-1])
    pos = (x0 - grid.x[0]) / grid.dx
    i = min(int(math.floor(pos)), len(grid.x) - 2)
    frac = pos - i
    wx[i] += 1.0 - frac
    wx[i + 1] += frac
    return (wx / grid.dx)[:, None] * fq[None, :]


@dataclass
class MfeSolution:
    grid: Grid
    value: np.ndarray
    density: np.ndarray
    policy: np.ndarray
    dv_dq: np.ndarray
    replication: np.ndarray
    residuals: list[float]
    converged: bool
    spec: ContentSpec
    cache: CacheSpec
    se: float
    terminal: TerminalCost
    mass_steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    static: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def mass_error_total(self) -> float:
        cell = self.grid.dx * self.grid.dq
        return float(np.max(np.abs(self.density.sum(axis=(1, 2)) * cell - 1.0)))

    @property
    def mass_error_step(self) -> float:
        return float(np.max(np.abs(self.mass_steps))) if self.mass_steps.size else 0.0

    @property
    def p_max(self) -> float:
        return self.cache.p_max(self.spec.size_L)

    def foc_residual(self) -> float:
        """Largest relative first-order-condition mismatch at interior, unclamped nodes."""
        p, dv = self.policy, self.dv_dq
        L, B = self.spec.size_L, self.cache.backhaul_B
        scale = (1.0 + self.replication)[:, None, None] / (self.se * self.grid.x)[None, :, None]
        mask = (p > 0) & (p < self.p_max)
        mask[:, :, 0] = mask[:, :, -1] = False
        if not mask.any():
            return 0.0
        lhs = (L * np.broadcast_to(scale, p.shape) / (B - L * p))[mask]
        rhs = L * dv[mask]
        return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def solve_mfe(spec: ContentSpec, cache: CacheSpec, grid_spec: GridSpec, se: float, *,
              terminal: TerminalCost = ZERO_TERMINAL, tolerance: float = 1e-4,
              max_iters: int = 50, damping: float = 0.5, static: bool = False,
              m_init: np.ndarray | None = None, p_init: np.ndarray | float | None = None
              ) -> MfeSolution:
    """Damped fixed point between the backward value sweep and the forward density sweep.

    The first iterate is taken undamped from the seed (m_init, p_init); by
    default the seed is m0 transported with p = 0.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if se <= 0:
        raise ValueError("spectral efficiency must be > 0")
    grid = grid_for(spec, cache, grid_spec, static)
    m0 = initial_density(grid, spec, cache)
    zeros = np.zeros(grid.shape)
    p = zeros if p_init is None else np.broadcast_to(np.asarray(p_init, dtype=float), grid.shape)
    if m_init is None:
        m, mass_steps = fpk_forward(grid, zeros, spec, cache, m0, static)
    else:
        m, mass_steps = np.asarray(m_init, dtype=float), np.zeros(grid.shape[0] - 1)
    cell = grid.dx * grid.dq
    residuals: list[float] = []
    converged = False
    value = dv = None
    for it in range(max_iters):
        i_r = replication_functional(m, p, spec, cache, grid)
        value, p, dv = hjb_backward(grid, i_r, se, spec, cache, terminal, static)
        m_new, mass_steps = fpk_forward(grid, p, spec, cache, m0, static)
        w = 1.0 if it == 0 else damping
        m_next = (1.0 - w) * m + w * m_new
        res = float(np.max(np.abs(m_next - m).sum(axis=(1, 2)) * cell))
        residuals.append(res)
        m = m_next
        log.debug("mfe iteration %d residual %.3e", it + 1, res)
        if res <= tolerance:
            converged = True
            break
    if not converged:
        log.warning("fixed point not converged after %d iterations (residual %.3e)",
                    max_iters, residuals[-1])
    # the stored replication path is the one the final value sweep used
    return MfeSolution(grid, value, m, p, dv, np.asarray(i_r), residuals, converged, spec, cache,
                       se, terminal, mass_steps, static)


def static_popularity_solve(spec: ContentSpec, cache: CacheSpec, grid_spec: GridSpec, se: float,
                            **kwargs) -> MfeSolution:
    """Fast path for frozen popularity: every x column evolves independently in Q."""
    if not spec.is_static:
        raise ContractViolation("static solve requires eta = 0 and u = a")
    return solve_mfe(spec, cache, grid_spec, se, static=True, **kwargs)


def hjb_residual(sol: MfeSolution) -> float:
    """Max interior mismatch of the discrete backward equation evaluated on the solution."""
    grid, v = sol.grid, sol.value
    psi = storage_cost(grid.q, sol.cache)[None, :]
    worst = 0.0
    for n in range(grid.shape[0] - 1):
        scale = _scale(sol.replication[n], sol.se, grid)
        p = sol.policy[n]
        rates = _rates(p, sol.spec, sol.cache, grid, sol.static)
        cost = scale * backhaul_cost(p, sol.cache.backhaul_B, sol.spec.size_L) + psi
        r = (v[n] - v[n + 1]) / grid.dt - cost - _apply_generator(v[n + 1], rates)
        worst = max(worst, float(np.max(np.abs(r[1:-1, 1:-1]))))
    return worst


def with_capacity(cache: CacheSpec, capacity: float) -> CacheSpec:
    return replace(cache, capacity_C=capacity)
