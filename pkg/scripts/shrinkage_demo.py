"""Print the closed-form eigenvalue shrinkage next to a brute-force grid search.

    python scripts/shrinkage_demo.py --rho 1.0 --taus 0.01 0.1 1
"""
import argparse

import numpy as np

from nldreg.cfsolver import ShrinkageParams, shrink_eigenvalue, shrinkage_objective


def grid_argmin(lam, params, n=200001):
    g = np.linspace(0.0, np.sqrt(lam) + 1.0, n)
    return g[np.argmin(shrinkage_objective(g, lam, params))]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--taus", type=float, nargs="+", default=[0.01, 0.1, 1.0])
    p.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])
    args = p.parse_args()

    for tau in args.taus:
        params = ShrinkageParams(tau, args.rho)
        print(f"tau={tau:g} rho={args.rho:g}")
        print(f"  {'lambda':>8} {'sqrt':>8} {'gamma':>8} {'grid':>8}")
        for lam in args.lams:
            g = shrink_eigenvalue(lam, params)
            print(f"  {lam:8.3f} {np.sqrt(lam):8.4f} {g:8.4f} {grid_argmin(lam, params):8.4f}")


if __name__ == "__main__":
    main()
