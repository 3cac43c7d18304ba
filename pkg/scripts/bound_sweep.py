#!/usr/bin/env python3
"""Sweep the divergence-bound checks over an (n, delta) grid.

Writes one CSV row per (bound, n, delta) cell and prints a compact
verdict table.  Edit the constants below or pass --out to keep the CSV.

Usage:
    python scripts/bound_sweep.py [--out sweep.csv] [--trials 20000] [--workers 2]
"""

import argparse
import sys

import klsmooth as k
from klsmooth.experiments import format_number, write_report_csv

DIST = {"kind": "geometric", "rate": 0.5, "d": 40}
SPEC = "laplace"
N_GRID = [100, 300, 1000, 3000]
DELTA_GRID = [1e-1, 1e-2, 1e-3, 1e-4]
BOUNDS = ("laplace_whp", "hellinger_whp")
MASTER_SEED = 20240817


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    pv = k.resolve_distribution(DIST)
    spec = k.EstimatorSpec.parse(SPEC)
    cells = k.regime_map(pv, spec, N_GRID, DELTA_GRID, trials=args.trials,
                         master_seed=MASTER_SEED, bound_ids=BOUNDS, workers=args.workers)
    print(f"{'bound':<16} {'n':>6} {'delta':>8} {'quantile':>14} {'rhs':>14}  verdict")
    for cell in cells:
        r = cell.report
        print(f"{r.bound_id:<16} {r.n:>6} {format_number(r.delta):>8} "
              f"{format_number(r.empirical_quantile):>14} {format_number(r.bound_rhs):>14}  {r.verdict}")
    if args.out:
        write_report_csv(args.out, [c.report for c in cells])
        print(f"wrote {args.out}")
    return 1 if any(c.report.verdict.startswith("violated") for c in cells) else 0


if __name__ == "__main__":
    sys.exit(main())
