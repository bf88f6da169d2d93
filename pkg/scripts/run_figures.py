"""Regenerate every figure table and print the headline numbers.

    python scripts/run_figures.py --out results --config configs/default.ini
"""
import argparse
import time
from pathlib import Path

from udcache import cli, experiments
from udcache.config import default_config, parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = (parse_config(args.config) if args.config else default_config()).with_seed(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    for name in experiments.EXPERIMENTS:
        t0 = time.perf_counter()
        tables = experiments.run_experiment(name, cfg)
        for table in tables:
            cli.write_table(args.out / f"{table.name}.csv", table, cfg)
        print(f"{name}: {sum(len(t.rows) for t in tables)} rows in {time.perf_counter() - t0:.1f} s")
        if name == "fig5":
            rows = {r[0]: r for r in tables[0].rows}
            for pol, r in rows.items():
                print(f"  {pol:<16} LRA {r[1]:.4f}  [{r[3]:.4f}, {r[4]:.4f}]")
            print(f"  MF below popularity by {100 * (1 - rows['mf'][1] / rows['popularity'][1]):.1f}%")
        elif name == "fig6":
            print(f"  MF replication {100 * experiments.replication_reduction(tables[0]):.1f}% "
                  "below popularity")


if __name__ == "__main__":
    main()
