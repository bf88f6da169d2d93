"""Command-line entry point: ``udcache solve | compare | export <figN>``.

Exit status: 0 on success, 1 on usage or configuration errors, 2 when the
equilibrium iteration does not converge (artifacts are still written).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .config import ConfigError, ExperimentConfig, default_config, flatten, parse_config
from .geometry import ParameterError, spectral_efficiency
from .solver import MfeSolution, grid_for

log = logging.getLogger("udcache")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2
FLOAT_FMT = "%.9g"
FIELDS = {"value": "value", "density": "density", "policy": "policy"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- writers -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def _header(cfg: ExperimentConfig, extra: dict | None = None) -> list[str]:
    lines = [f"# seed={cfg.seed}", f"# config_sha256={cfg.digest()}"]
    lines += [f"# {k}={_fmt(v)}" for k, v in (extra or {}).items()]
    return lines


def write_table(path: Path, table: experiments.Table, cfg: ExperimentConfig) -> Path:
    lines = _header(cfg, {"table": table.name})
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_field(path: Path, sol: MfeSolution, values: np.ndarray, cfg: ExperimentConfig) -> Path:
    g = sol.grid
    t, x, q = np.meshgrid(g.t, g.x, g.q, indexing="ij")
    data = np.column_stack([t.ravel(), x.ravel(), q.ravel(), values.ravel()])
    with path.open("w") as fh:
        fh.write("\n".join(_header(cfg)) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",", header="t,x,Q,value", comments="")
    return path


def write_metadata(path: Path, cfg: ExperimentConfig, items: dict) -> Path:
    lines = [f"seed = {cfg.seed}", f"config_sha256 = {cfg.digest()}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
    lines += [f"param.{k} = {v}" for k, v in flatten(cfg)]
    path.write_text("\n".join(lines) + "\n")
    return path


def _prefix(label: str) -> str:
    return f"mfe_{label}" if label else "mfe"


# -- artifact loading --------------------------------------------------------

def _read_field(path: Path, shape) -> np.ndarray:
    rows = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    data = np.array([float(r.rsplit(",", 1)[1]) for r in rows[1:]])
    if data.size != int(np.prod(shape)):
        raise UsageError(f"{path}: expected {int(np.prod(shape))} rows, found {data.size}")
    return data.reshape(shape)


def load_solution(out: Path, cfg: ExperimentConfig, index: int = 0) -> MfeSolution:
    """Rebuild an equilibrium from the artifacts written by ``solve``."""
    label = cfg.content_labels[index]
    content = cfg.contents[index]
    meta_path = out / f"{_prefix(label)}.meta.txt"
    if not meta_path.exists():
        raise UsageError(f"no solved equilibrium at {meta_path}; run `solve` first or enable inline_solve")
    meta = dict(ln.split(" = ", 1) for ln in meta_path.read_text().splitlines() if " = " in ln)
    if meta.get("config_sha256") != cfg.digest():
        raise UsageError(f"{meta_path} was produced by a different configuration")
    grid = grid_for(content, cfg.cache, cfg.grid)
    fields = {k: _read_field(out / f"{_prefix(label)}_{k}.csv", grid.shape) for k in FIELDS}
    residuals = [float(r) for r in meta.get("residuals", "").split()]
    return MfeSolution(grid, fields["value"], fields["density"], fields["policy"],
                       np.zeros(grid.shape), np.zeros(grid.shape[0]), residuals,
                       meta.get("converged") == "true", content, cfg.cache,
                       spectral_efficiency(cfg.net), cfg.terminal)


# -- commands ----------------------------------------------------------------

def cmd_solve(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    status = EXIT_OK
    for label, content in zip(cfg.content_labels, cfg.contents):
        t0 = time.perf_counter()
        sol = experiments.solve(cfg, content)
        log.info("solve %s: %d iterations, residual %.3e, %.2f s", label or "content",
                 sol.iterations, sol.residuals[-1], time.perf_counter() - t0)
        prefix = _prefix(label)
        for name, attr in FIELDS.items():
            write_field(out / f"{prefix}_{name}.csv", sol, getattr(sol, attr), cfg)
        write_metadata(out / f"{prefix}.meta.txt", cfg, {
            "converged": sol.converged,
            "iterations": sol.iterations,
            "residuals": " ".join(FLOAT_FMT % r for r in sol.residuals),
            "mass_error_step": sol.mass_error_step,
            "mass_error_total": sol.mass_error_total,
            "spectral_efficiency": sol.se,
        })
        if not sol.converged:
            status = EXIT_NONCONVERGED
    return status


def _write_tables(tables, cfg: ExperimentConfig, out: Path, meta: dict) -> None:
    for table in tables:
        write_table(out / f"{table.name}.csv", table, cfg)
        write_metadata(out / f"{table.name}.meta.txt", cfg, {**meta, **table.meta})


def cmd_compare(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    solution = None
    if "mf" in cfg.policies:
        solution = experiments.solve(cfg) if cfg.sim.inline_solve else load_solution(out, cfg)
    tables = experiments.fig5(cfg, threads, solution) + experiments.fig6(cfg, threads)
    _write_tables(tables, cfg, out, {"command": "compare"})
    if solution is not None and not solution.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_export(cfg: ExperimentConfig, which: str, out: Path, threads: int = 1) -> int:
    if which not in experiments.EXPERIMENTS:
        raise UsageError(f"unknown figure {which!r}; valid: {', '.join(experiments.EXPERIMENTS)}")
    tables = experiments.run_experiment(which, cfg, threads)
    _write_tables(tables, cfg, out, {"command": f"export {which}"})
    flags = [v for k, v in tables[0].meta.items() if "converged" in k]
    return EXIT_OK if all(flags) else EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (default: built-in parameter set)")
    common.add_argument("--seed", type=int, help="root seed, overrides [run] seed")
    common.add_argument("--out", type=Path, help="output directory, overrides [run] out")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="udcache", description="Mean-field edge caching experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve the mean-field equilibrium")
    sub.add_parser("compare", parents=[common], help="LRA and replication comparison tables")
    exp = sub.add_parser("export", parents=[common], help="write one figure's table")
    exp.add_argument("which", help=f"one of {', '.join(experiments.EXPERIMENTS)}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = parse_config(args.config) if args.config else default_config()
        cfg = cfg.with_seed(args.seed)
        out = args.out if args.out is not None else Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            status = cmd_solve(cfg, out, args.threads)
        elif args.command == "compare":
            status = cmd_compare(cfg, out, args.threads)
        else:
            status = cmd_export(cfg, args.which, out, args.threads)
    except (ConfigError, ParameterError, UsageError, OSError) as exc:
        print(f"udcache: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    # wall time goes to stderr so output files stay byte-identical across reruns
    print(f"udcache {args.command}: done in {time.perf_counter() - t0:.2f} s (exit {status})",
          file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
