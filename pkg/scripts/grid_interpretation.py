#!/usr/bin/env python3
"""Classification outcomes for one material read through two stimulus grids.

Runs the same K=6 type-I staircase procedure against the same PETN
response curve on the coarse notch ladder and on the all-intermediate
ladder, and tabulates the limiting-stimulus distribution, the fraction
of runs classified "sensitive" at the 80 N threshold, and the mean trial
count.  The two columns answer the question "does the apparatus grid
change the verdict?" — they differ by about eleven percentage points.

Usage:
    python scripts/grid_interpretation.py            # S=100,000 (minutes)
    python scripts/grid_interpretation.py --quick    # S=10,000
"""

import argparse

from senskit.data import PETN_THETA
from senskit.grids import builtin_grid
from senskit.models import ResponseModel
from senskit.simulate import un_grid_comparison


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--S", type=int, default=100_000,
                        help="staircase runs per grid (default 100,000)")
    parser.add_argument("--quick", action="store_true",
                        help="shorthand for --S 10000")
    parser.add_argument("--seed", type=int, default=4, help="master seed")
    parser.add_argument("--threshold", type=float, default=80.0,
                        help="classification threshold in N")
    args = parser.parse_args()
    S = 10_000 if args.quick else args.S

    model = ResponseModel.from_theta(PETN_THETA)
    summary_a, summary_b = un_grid_comparison(
        model, builtin_grid("notch-6"), builtin_grid("all-intermediate"),
        k_negatives=6, limiting_type="I", threshold=args.threshold,
        S=S, master_seed=args.seed,
    )

    print(f"S = {S} staircase runs per grid, master seed {args.seed}, "
          f"threshold {args.threshold:g} N\n")
    print(f"{'limiting load':>14}  {'notch-6':>10}  {'all-intermediate':>16}")
    values = sorted(
        {v for v, _ in summary_a.distribution} | {v for v, _ in summary_b.distribution},
        key=lambda v: (v is None, v if v is not None else 0.0),
    )
    counts_a = dict(summary_a.distribution)
    counts_b = dict(summary_b.distribution)
    for value in values:
        label = "none" if value is None else f"{value:g} N"
        print(f"{label:>14}  {counts_a.get(value, 0) / S:>10.4f}  "
              f"{counts_b.get(value, 0) / S:>16.4f}")
    print()
    for summary in (summary_a, summary_b):
        print(f"{summary.grid_name}: sensitive rate "
              f"{summary.classification_rate:.4f}, mean trials "
              f"{summary.mean_trials:.2f}")


if __name__ == "__main__":
    main()
