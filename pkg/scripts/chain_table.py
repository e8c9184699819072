"""Per-level chain checks for every family, as CSV on stdout.

    python scripts/chain_table.py [--n 3] [--trials 100]
"""
import argparse
import csv
import sys

import numpy as np

from reflectlab.chains import FAMILIES, build_chain, chain_rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    writer = csv.DictWriter(sys.stdout, lineterminator="\n",
                            fieldnames=["family", "n", "q", "level", "check", "residual",
                                        "tolerance", "status"])
    writer.writeheader()
    for family in FAMILIES:
        # the dual quadric needs n >= 4 for a nontrivial q range
        n = max(args.n, 4) if family == "quadric_dual" else args.n
        chain = build_chain(family, n, q=1 if family.startswith("quadric") else None)
        for row in chain_rows(chain, args.trials, rng):
            writer.writerow({"family": family, "n": n, "q": chain.q, **row})


if __name__ == "__main__":
    main()
