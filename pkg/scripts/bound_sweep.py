"""Delta sweep of the three bounds; writes tidy CSV (one row per report and timestep).

    python scripts/bound_sweep.py --instances 20 --out sweep.csv
"""

import argparse
import csv
import sys

from bamdp.envs import make_bernoulli_chain, make_random_bamdp
from bamdp.verification import CSV_HEADER, sweep_bounds

DELTAS = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=3)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    models = [("chain", make_bernoulli_chain(0.8, args.horizon, "height"))]
    models += [(f"random-{s}", make_random_bamdp(s, 3, 2, 2 + s % 2, args.horizon)) for s in range(args.instances)]

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["instance", "weighting", *CSV_HEADER, "epsilon"])
    worst = {}
    for name, m in models:
        for r in sweep_bounds(m, DELTAS):
            for row in r.csv_rows():
                w.writerow([name, r.meta.get("weighting", ""), *row, "" if r.epsilon_used is None else repr(r.epsilon_used)])
            worst[r.proposition] = max(worst.get(r.proposition, 0.0), r.max_ratio)
            if not r.passed:
                print(f"VIOLATION {name} {r.proposition} delta={r.delta}", file=sys.stderr)
    if fh is not sys.stdout:
        fh.close()
    for prop, ratio in sorted(worst.items()):
        print(f"{prop}: worst gap/bound = {ratio:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
