#!/usr/bin/env python3
"""Sweep every catalog problem, print the certified enclosures against the
oracle, and fit the log-log rate of the certified relative remainder.

Usage: python scripts/convergence_study.py [--n-sweep 25,100,400,1600]
"""

import argparse
import math

import numpy as np

from certlap import approximate, catalog, estimate_constants, integrate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-sweep", default="25,100,400,1600")
    ap.add_argument("--grid-res", type=int, default=64)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()
    sweep = tuple(int(t) for t in args.n_sweep.split(","))

    print(f"{'problem':<12}{'N':>6}  {'leading':>13}  {'oracle':>13}  "
          f"{'|err|':>10}  {'remainder':>10}  ok")
    for spec in catalog():
        consts = estimate_constants(spec, grid_res=args.grid_res, n_sweep=sweep)
        rels = []
        for n in sweep:
            r = approximate(spec, consts, n)
            o = integrate(spec, n, tol=args.tol)
            ok = r.contains(o.value, slack=r.oracle_slack(o))
            rels.append(r.relative_remainder)
            print(f"{spec.name:<12}{n:>6}  {r.leading:>13.6e}  {o.value:>13.6e}  "
                  f"{abs(o.value - r.leading):>10.3e}  {r.remainder_magnitude:>10.3e}  "
                  f"{'yes' if ok else 'NO'}")
        slope = float(np.polyfit(np.log(sweep), np.log(rels), 1)[0])
        print(f"{'':<12}certified relative remainder ~ N^{slope:+.2f}")
        print()


if __name__ == "__main__":
    main()
