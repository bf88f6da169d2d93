"""Sweep the terminal charge and report the figure metrics it controls.

For each (weight, knee) pair prints the largest static policy at x=0.4, its
monotonicity in Q, the LRA reduction over the popularity baseline and the
replication reduction over the x0 sweep. Uses fewer runs than the defaults.

    python scripts/calibrate_terminal.py --weights 4 6 8 --knees 0 0.5
"""
import argparse
from dataclasses import replace

import numpy as np

from udcache import experiments
from udcache.config import default_config
from udcache.costs import TerminalCost


def metrics(cfg):
    (f3,) = experiments.fig3(cfg)
    d = np.array(f3.rows)
    monotone = all(np.all(np.diff(d[d[:, 0] == t, 2]) >= -1e-12) for t in np.unique(d[:, 0]))
    f5 = {r[0]: r[1] for r in experiments.fig5(cfg)[0].rows}
    (f6,) = experiments.fig6(cfg)
    return d[:, 2].max(), monotone, 1 - f5["mf"] / f5["popularity"], \
        experiments.replication_reduction(f6)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--weights", type=float, nargs="+", default=[4.0, 6.0, 8.0])
    ap.add_argument("--knees", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--runs", type=int, default=200)
    args = ap.parse_args()
    base = default_config()
    base = replace(base, sim=replace(base.sim, n_runs=args.runs), policies=("mf", "popularity"))
    print("weight  knee  max_p   monotone  lra_red  repl_red")
    for w in args.weights:
        for s in args.knees:
            cfg = replace(base, terminal=TerminalCost("unused", w, s))
            p, mono, lra, rep = metrics(cfg)
            print(f"{w:6.2f} {s:5.2f} {p:6.3f}   {str(mono):<8} {100 * lra:6.1f}%  {100 * rep:6.1f}%")


if __name__ == "__main__":
    main()
