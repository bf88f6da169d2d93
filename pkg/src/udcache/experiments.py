"""Figure experiments: equilibrium slices, density snapshots, LRA comparison, replication sweep.

Each experiment returns one or more ``Table`` objects. The dynamic
experiments take (x0, eta, a, u) from the base content of the configuration;
per-experiment overrides (x0 sweep, static popularity) are listed in each
table's ``meta``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ExperimentConfig
from .dynamics import ContentSpec
from .geometry import spectral_efficiency
from .policies import (ConstantPolicy, MeanFieldPolicy, PopularityPolicy, RandomPolicy,
                       candidate_grid, exhaustive_search)
from .simulation import SimConfig, cost_report, estimate_lra, simulate_network
from .solver import MfeSolution, solve_mfe, static_popularity_solve

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig3", "fig4", "fig5", "fig6")
FIG3_X = 0.4
FIG4_X = (0.1, 0.5, 0.9)
FIG4_SNAPSHOTS = 5
FIG6_X0 = tuple(round(0.1 * k, 1) for k in range(1, 10))


class UnknownExperiment(KeyError):
    pass


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def solve(cfg: ExperimentConfig, content: ContentSpec | None = None, *, static: bool = False
          ) -> MfeSolution:
    content = cfg.content if content is None else content
    se = spectral_efficiency(cfg.net)
    fn = static_popularity_solve if static else solve_mfe
    return fn(content, cfg.cache, cfg.grid, se, terminal=cfg.terminal,
              tolerance=cfg.solver.tolerance, max_iters=cfg.solver.max_iters,
              damping=cfg.solver.damping)


def static_content(content: ContentSpec, x: float) -> ContentSpec:
    """Frozen popularity at x: no drift, no volatility."""
    return replace(content, a=content.u, eta=0.0, x0=x)


def sim_config(cfg: ExperimentConfig, content: ContentSpec | None = None, seed: int | None = None
               ) -> SimConfig:
    return SimConfig(cfg.net, cfg.content if content is None else content, cfg.cache, cfg.terminal,
                     cfg.sim.n_sbs, cfg.sim.n_runs, cfg.grid.horizon_T, cfg.sim.n_steps,
                     cfg.seed if seed is None else seed)


def _nearest(axis: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(axis - value)))


def fig3(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    sol = solve(cfg, static_content(cfg.content, FIG3_X), static=True)
    g = sol.grid
    j = _nearest(g.x, FIG3_X)
    rows = [(float(t), float(q), float(sol.policy[n, j, k]))
            for n, t in enumerate(g.t) for k, q in enumerate(g.q)]
    meta = {"x_node": float(g.x[j]), "converged": sol.converged, "iterations": sol.iterations,
            "static": True}
    return [Table("fig3", ("t", "Q", "p_star"), rows, meta)]


def fig4(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    rows, meta = [], {"static": True}
    for x in FIG4_X:
        sol = solve(cfg, static_content(cfg.content, x), static=True)
        g = sol.grid
        j = _nearest(g.x, x)
        snaps = np.unique(np.linspace(0, len(g.t) - 1, FIG4_SNAPSHOTS).round().astype(int))
        for n in snaps:
            col = sol.density[n, j]
            col = col / (col.sum() * g.dq)
            rows.extend((float(x), float(g.t[n]), float(q), float(d)) for q, d in zip(g.q, col))
        meta[f"converged_x{x}"] = sol.converged
    return [Table("fig4", ("x", "t", "Q", "density"), rows, meta)]


def _report_row(name: str, rep, param: float | None = None) -> tuple:
    return (name, rep.mean, rep.std, rep.ci_low, rep.ci_high, rep.n_runs, rep.barrier_violations,
            float("nan") if param is None else param)


def fig5(cfg: ExperimentConfig, threads: int = 1, solution: MfeSolution | None = None
         ) -> list[Table]:
    content = cfg.content
    se = spectral_efficiency(cfg.net)
    p_max = cfg.cache.p_max(content.size_L)
    sc = sim_config(cfg)
    rows, meta = [], {"seed": cfg.seed, "exhaustive_delta": cfg.sim.exhaustive_delta}
    if "mf" in cfg.policies:
        sol = solution if solution is not None else solve(cfg)
        meta["mf_converged"] = sol.converged
        rows.append(_report_row("mf", estimate_lra(sc, MeanFieldPolicy(sol), se, "mf")))
    if "popularity" in cfg.policies:
        rows.append(_report_row("popularity", estimate_lra(sc, PopularityPolicy(p_max), se)))
    if "random" in cfg.policies:
        rows.append(_report_row("random", estimate_lra(sc, RandomPolicy(None, p_max), se)))
    tables = []
    if "exhaustive" in cfg.policies:
        reports = {}

        def lra(c):
            res = simulate_network(sc, ConstantPolicy(c, p_max), se)
            reports[c] = cost_report(f"constant:{c:g}", res.lra)
            return reports[c].mean

        candidates = candidate_grid(cfg.sim.exhaustive_delta, p_max)
        with ThreadPoolExecutor(max(1, threads)) as pool:
            means = dict(zip(candidates, pool.map(lra, candidates)))
        best, table = exhaustive_search(candidates, means.__getitem__)
        rows.append(_report_row("exhaustive-best", reports[best], best))
        tables.append(Table("fig5_exhaustive", ("p", "mean_lra", "ci_low", "ci_high"),
                            [(c, m, reports[c].ci_low, reports[c].ci_high) for c, m in table],
                            dict(meta)))
    cols = ("policy", "mean_lra", "std", "ci_low", "ci_high", "n_runs", "barrier_violations", "param")
    return [Table("fig5", cols, rows, meta)] + tables


def fig6(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    se = spectral_efficiency(cfg.net)
    p_max = cfg.cache.p_max(cfg.content.size_L)
    names = [p for p in ("mf", "popularity", "random") if p in cfg.policies]

    def point(x0):
        content = replace(cfg.content, x0=x0)
        sc = sim_config(cfg, content)
        out = []
        for name in names:
            if name == "mf":
                pol = MeanFieldPolicy(solve(cfg, content))
            elif name == "popularity":
                pol = PopularityPolicy(p_max)
            else:
                pol = RandomPolicy(None, p_max)
            out.append((x0, name, simulate_network(sc, pol, se).replication().ratio))
        return out

    with ThreadPoolExecutor(max(1, threads)) as pool:
        rows = [r for chunk in pool.map(point, FIG6_X0) for r in chunk]
    return [Table("fig6", ("x0", "policy", "replication_ratio"), rows, {"seed": cfg.seed})]


_RUNNERS = {"fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6}


def run_experiment(name: str, cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    if name not in _RUNNERS:
        raise UnknownExperiment(f"unknown experiment {name!r}; valid: {', '.join(EXPERIMENTS)}")
    log.info("running %s", name)
    return _RUNNERS[name](cfg, threads)


def replication_reduction(table: Table, baseline: str = "popularity") -> float:
    """1 - mean MF ratio / mean baseline ratio over the x0 sweep."""
    by = {}
    for x0, pol, r in table.rows:
        by.setdefault(pol, []).append(r)
    return 1.0 - float(np.mean(by["mf"])) / float(np.mean(by[baseline]))
