#!/usr/bin/env python3
"""Search per-occasion sighting counts consistent with published census rows.

Census reports often publish only the distinct-individual total and the
point estimate, not the per-occasion counts behind them. For each row given
as individuals:estimate, enumerate every (n, K, k) whose distinct total
matches and whose Lincoln-Petersen estimate lands within the tolerance.

Example:
    python3 scripts/feasibility_tables.py 103:119 1258:2307 1942:2250 --tol 1
"""

from __future__ import annotations

import argparse
import sys

from photocensus.census import CensusInput, feasibility_search, lincoln_petersen


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "rows",
        nargs="+",
        help="rows as individuals:estimate, e.g. 1942:2250",
    )
    parser.add_argument("--tol", type=float, default=1.0)
    parser.add_argument("--limit", type=int, default=5, help="triples shown per row")
    args = parser.parse_args(argv)

    for raw in args.rows:
        try:
            individuals_text, estimate_text = raw.split(":")
            individuals, estimate = int(individuals_text), float(estimate_text)
        except ValueError:
            print(f"bad row {raw!r}; expected individuals:estimate", file=sys.stderr)
            return 1

        triples = feasibility_search(individuals, estimate, args.tol)
        print(f"individuals={individuals} estimate={estimate:g} tol={args.tol:g}: "
              f"{len(triples)} feasible triples")
        for n, K, k in triples[: args.limit]:
            value = lincoln_petersen(CensusInput(n, K, k)).n_est
            print(f"  n={n:5d}  K={K:5d}  k={k:5d}  -> {value:.2f}")
        if len(triples) > args.limit:
            print(f"  ... {len(triples) - args.limit} more")
    return 0


if __name__ == "__main__":
    sys.exit(main())
