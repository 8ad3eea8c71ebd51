#!/usr/bin/env python3
"""Sampling distribution of the studentised log-median statistic.

Simulates up-and-down experiments against the PETN probit truth, fits
the probit model to each, and forms the squared studentised statistic W
along the direction that vanishes at the true log median.  If the
asymptotics are trustworthy at the given n, log W follows the exact
log chi-square(1) law; the script reports the KS distance between the
two and the fraction of replicates whose MLE did not exist.  Run it at a
few sample sizes to watch the distance shrink.

Usage:
    python scripts/pivot_check.py                 # n=30 and n=100, S=10,000
    python scripts/pivot_check.py --n 50 --S 2000
"""

import argparse

from senskit.data import PETN_THETA
from senskit.simulate import logw_study


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, action="append", default=None,
                        help="trials per replicate (repeatable; default 30 and 100)")
    parser.add_argument("--S", type=int, default=10_000,
                        help="replicates (default 10,000)")
    parser.add_argument("--d", type=float, default=0.2, help="working step size")
    parser.add_argument("--x1", type=float, default=360.0,
                        help="initial load in N")
    parser.add_argument("--seed", type=int, default=3, help="master seed")
    args = parser.parse_args()
    sizes = args.n or [30, 100]

    print(f"S = {args.S}, x1 = {args.x1:g} N, d = {args.d:g}, "
          f"master seed {args.seed}\n")
    print(f"{'n':>5}  {'KS distance':>12}  {'undefined':>10}")
    for n in sizes:
        study = logw_study(PETN_THETA, x1=args.x1, d=args.d, n=n, S=args.S,
                           master_seed=args.seed)
        print(f"{n:>5}  {study.ks_distance:>12.4f}  "
              f"{study.undefined_count:>6} ({study.undefined_fraction:.2%})")


if __name__ == "__main__":
    main()
