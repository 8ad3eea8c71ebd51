#!/usr/bin/env python3
"""Design-and-estimator comparison across response-curve families.

For every (model family, target p, method) cell this simulates S
replicated experiments of n trials, estimates the target quantile, and
reports MSE on the working (log) axis, interval coverage, mean bounded
interval width, and how often the estimate was undefined or unbounded.
Methods: up-and-down with probit MLE + ratio intervals, biased-coin
design with centred isotonic regression, and the Robbins-Monro-Joseph
recursion with its normal-pivot interval.

Writes the full table to results/design-comparison.csv (and a lossless
.json alongside) and prints a compact summary.

Usage:
    python scripts/design_comparison.py --quick      # S=1,000 smoke run
    python scripts/design_comparison.py              # S=10,000 (minutes)
"""

import argparse
import pathlib

from senskit.simulate import export_results, mse_grid_configs, run_study


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--S", type=int, default=10_000,
                        help="replicates per cell (default 10,000)")
    parser.add_argument("--n", type=int, default=30, help="trials per replicate")
    parser.add_argument("--quick", action="store_true",
                        help="shorthand for --S 1000")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out-dir", default="results",
                        help="directory for the exported tables")
    args = parser.parse_args()
    S = 1_000 if args.quick else args.S

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for config in mse_grid_configs(n=args.n, S=S, master_seed=args.seed):
        row = run_study(config)
        rows.append(row)
        mse = "---" if row.mse != row.mse else f"{row.mse:.4f}"
        cov = "---" if row.coverage != row.coverage else f"{row.coverage:.3f}"
        print(f"{row.config.label:<28} mse={mse:>8} coverage={cov:>6} "
              f"width={row.mean_ci_width:.3f} undefined={row.undefined_count}",
              flush=True)

    export_results(rows, str(out_dir / "design-comparison.csv"))
    export_results(rows, str(out_dir / "design-comparison.json"),
                   format="structured-text")
    print(f"\nwrote {len(rows)} rows to {out_dir}/design-comparison.csv"
          f" and .json")


if __name__ == "__main__":
    main()
