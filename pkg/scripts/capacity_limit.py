"""Gap between the solved policy and the storage-independent large-capacity control.

    python scripts/capacity_limit.py --weight 4 --knee 0
"""
import argparse

import numpy as np

from udcache.config import default_config
from udcache.costs import TerminalCost
from udcache.geometry import spectral_efficiency
from udcache.solver import optimal_control_high_storage, solve_mfe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--weight", type=float, default=6.0)
    ap.add_argument("--knee", type=float, default=0.5)
    ap.add_argument("--factors", type=float, nargs="+", default=[1, 10, 100])
    args = ap.parse_args()
    cfg = default_config()
    se = spectral_efficiency(cfg.net)
    term = TerminalCost("unused", args.weight, args.knee)
    for f in args.factors:
        cache = cfg.cache.scaled(f)
        sol = solve_mfe(cfg.content, cache, cfg.grid, se, terminal=term)
        gamma_hat = float(np.median(sol.dv_dq))
        lim = optimal_control_high_storage(sol.replication[:, None, None], se,
                                           sol.grid.x[None, :, None], gamma_hat, cfg.content, cache)
        gap = np.abs(sol.policy - lim)
        n, i, k = np.unravel_index(gap.argmax(), gap.shape)
        print(f"C x{f:g}: gamma_hat {gamma_hat:.4f}  sup gap {gap.max():.4f} "
              f"at t={sol.grid.t[n]:.2f} x={sol.grid.x[i]:.2f} Q={sol.grid.q[k]:.3f}")


if __name__ == "__main__":
    main()
