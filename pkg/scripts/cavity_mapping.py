"""Typical current of the cavity chain against the long-range chain with gamma_eff = 2g/sqrt(N)."""
import argparse

import numpy as np

from lrtransport.analysis import cavity_longrange_overlap, thresholds
from lrtransport.ensemble import SweepConfig, run_sweep
from lrtransport.model import (CavityParams, ChainSpec, ModelKind, effective_long_range_coupling,
                               sample_disorder)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--g-ev", type=float, default=0.1008)
    p.add_argument("--omega-ev", type=float, default=0.0124)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--points", type=int, default=8)
    args = p.parse_args()

    g = args.g_ev / args.omega_ev
    cav = ChainSpec(args.n, 1.0, 0.0, ModelKind.CAVITY, CavityParams(g))
    lr = ChainSpec(args.n, 1.0, effective_long_range_coupling(g, args.n))
    print(f"gamma_eff={lr.gamma:.6g} omega, W_gap={thresholds(args.n, 1.0, lr.gamma).w_gap:.6g}")
    cmp0 = cavity_longrange_overlap(cav, sample_disorder(cav, 0.0, 0, 0))
    print(f"W=0 polariton gap: numeric {cmp0.gap_numeric:.10g}, "
          f"sqrt(N g^2 + omega^2) - omega = {cmp0.gap_formula:.10g}")
    grid = np.logspace(-2, 5, args.points)
    cfg = SweepConfig(models=[cav, lr], w_grid=list(grid), realizations=args.realizations,
                      observables=("current",), seed=2, common_disorder=True)
    typ = {}
    for pt in run_sweep(cfg):
        typ[pt.model_index, pt.w_index] = pt.summaries["current"].typical
        if pt.model_index == 1:
            a, b = typ[0, pt.w_index], typ[1, pt.w_index]
            print(f"W={pt.w:10.4g} cavity={a:.4e} long-range={b:.4e} ratio={a / b:.3f}",
                  flush=True)


if __name__ == "__main__":
    main()
