"""Average and typical tail probability of a spread wave packet versus N."""
import argparse

import numpy as np

from lrtransport.dynamics import TailStats, center_site, propagate
from lrtransport.model import ChainSpec, build_hamiltonian, sample_disorder
from lrtransport.spectral import eig_hermitian


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000])
    p.add_argument("--w", type=float, nargs="+", default=[200.0, 400.0])
    p.add_argument("--realizations", type=int, default=40)
    p.add_argument("--seed", type=int, default=13)
    args = p.parse_args()

    times = np.linspace(500, 1e4, 200)
    for w in args.w:
        avg, typ = [], []
        for n in args.sizes:
            spec = ChainSpec(n, 1.0, 1.0)
            stats = TailStats()
            for r in range(args.realizations):
                hs = eig_hermitian(build_hamiltonian(spec, sample_disorder(spec, w, args.seed, r)))
                stats.add(propagate(hs, center_site(n), times).probabilities, center_site(n))
            avg.append(stats.average)
            typ.append(stats.typical)
            print(f"W={w:g} N={n} average={stats.average:.4e} typical={stats.typical:.4e}",
                  flush=True)
        x = np.log(args.sizes)
        print(f"W={w:g} slopes: average {np.polyfit(x, np.log(avg), 1)[0]:.3f}, "
              f"typical {np.polyfit(x, np.log(typ), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
