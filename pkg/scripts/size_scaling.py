"""Typical current and mean integrated transmission versus chain length at fixed W."""
import argparse

import numpy as np

from lrtransport.ensemble import SweepConfig, run_sweep
from lrtransport.model import ChainSpec


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400, 800, 1600])
    p.add_argument("--w", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--realizations", type=int, default=40)
    p.add_argument("--seed", type=int, default=11)
    args = p.parse_args()

    cfg = SweepConfig(models=[ChainSpec(n, 1.0, args.gamma) for n in args.sizes],
                      w_grid=[args.w], realizations=args.realizations,
                      observables=("current", "t_int"), seed=args.seed)
    rows = []
    for pt in run_sweep(cfg):
        rows.append((pt.spec.n_sites, pt.summaries["current"].typical,
                     pt.summaries["t_int"].mean))
        print("N=%d I_typ=%.4e T_int=%.4e" % rows[-1], flush=True)
    n, i_typ, t_int = (np.array(c) for c in zip(*rows))
    print("log-log slopes: I_typ %.3f, T_int %.3f"
          % (np.polyfit(np.log(n), np.log(i_typ), 1)[0],
             np.polyfit(np.log(n), np.log(t_int), 1)[0]))


if __name__ == "__main__":
    main()
