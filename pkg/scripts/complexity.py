"""Backup counts of naive vs informed value iteration as the horizon grows.

    python scripts/complexity.py --out complexity.csv
"""

import argparse
import csv
import sys

from bamdp.envs import make_separating_bamdp, make_two_chain
from bamdp.info_horizon import information_horizon
from bamdp.informed import informed_value_iteration
from bamdp.planning import bamdp_value_iteration
from bamdp.verification import planning_complexity_report


def rows(model, label):
    I = int(information_horizon(model).value)
    tables = [bamdp_value_iteration(model), informed_value_iteration(model, I)]
    for r in planning_complexity_report(tables, model)["tables"]:
        yield [label, model.horizon, r["algorithm"], r["backend"], I, r["bamdp_backups"], r["mdp_backups"], r["predicted_bamdp_backups"], r["matches"]]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-horizon", type=int, default=8)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["instance", "H", "algorithm", "backend", "I", "bamdp_backups", "mdp_backups", "predicted_bamdp", "matches"])
    for H in range(2, args.max_horizon + 1):
        w.writerows(rows(make_separating_bamdp(0, 4, 2, 3, H), "separating"))
        w.writerows(rows(make_separating_bamdp(0, 4, 2, 3, H, backend="grid", resolution=4), "separating-grid"))
        w.writerows(rows(make_two_chain(3, horizon=max(H, 4)), "twochain-3"))
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
