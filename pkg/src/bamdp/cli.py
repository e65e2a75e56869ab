"""Command-line front end.

Exit codes: 0 success, 1 a checked bound was violated, 2 usage error,
3 solver or domain error, 4 I/O or unreadable input file.
Wall-clock timings never enter the main artifacts; they go to a
``<out>.timing.json`` side file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from bamdp.abstraction import (
    DeltaCover,
    EpistemicAbstraction,
    build_greedy_cover,
    build_lattice_cover,
    informed_abstract_value_iteration,
)
from bamdp.envs import load_problem, parse_env_spec, problem_dict
from bamdp.errors import AbstractHorizonInfinite, BamdpError, InfiniteInformationHorizon, ProblemFileError, ValidationError
from bamdp.info_horizon import information_horizon
from bamdp.informed import informed_value_iteration
from bamdp.planning import bamdp_value_iteration
from bamdp.verification import (
    GroundSolution,
    check_approx_error_bound,
    check_greedy_loss_bound,
    check_performance_loss_bound,
    check_value_of_information,
    lifted_abstract_values,
    make_abstraction,
    parse_sweep,
    reachable_beliefs,
    reports_to_csv,
)

EXIT_OK, EXIT_BOUND, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_BENCH = ["chain:q=4/5,H=3", "chain:q=1,H=4", "twochain:N=3", "separating:seed=0,S=3,A=2,K=2,H=5", "random:seed=0,S=3,A=2,K=2,H=3"]


class UsageError(Exception):
    pass


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _emit(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _timing(path, started, **extra):
    if path in (None, "-"):
        return
    with open(f"{path}.timing.json", "w") as fh:
        fh.write(_dump({"wall_seconds": time.perf_counter() - started, **extra}))


def load_model(args):
    if bool(args.instance) == bool(args.env):
        raise UsageError("give exactly one of --instance FILE or --env SPEC")
    kw = {"max_hyperstates": args.max_hyperstates}
    if getattr(args, "backend", "reachable") == "grid":
        if args.resolution is None:
            raise UsageError("--backend grid needs --resolution")
        kw.update(backend="grid", resolution=args.resolution)
    try:
        if args.env:
            return parse_env_spec(args.env, **kw)
    except ValidationError as err:
        raise UsageError(str(err)) from err
    model = load_problem(args.instance)
    if kw.get("backend") == "grid":
        model = model.with_backend("grid", args.resolution)
    model.max_hyperstates = args.max_hyperstates
    return model


def load_cover(args, K):
    if getattr(args, "cover", None):
        cover = DeltaCover.load(args.cover)
        if cover.dim != K:
            raise UsageError(f"cover has dimension {cover.dim}, model has {K} hypotheses")
        return cover
    if getattr(args, "delta", None) is not None:
        return build_lattice_cover(K, args.delta, seed=args.seed)
    raise UsageError("give --cover FILE or --delta D")


def _initial_values(model, value_fn):
    return [
        {"state": x.state, "belief": x.belief.probs.tolist(), "value": float(value_fn(1, x.state, x.belief.probs))}
        for x in model.initial_hyperstates()
    ]


def _write_table(table, args, model, value_fn=None):
    table.meta["initial_values"] = _initial_values(model, value_fn or table.value)
    _emit(table.to_json(), args.out)
    if args.csv:
        _emit(table.to_csv(), args.csv)


def _abstract_plan(args, model):
    cover = load_cover(args, model.ensemble.num_hypotheses)
    abstraction = make_abstraction(model, cover, args.weighting)
    plan = informed_abstract_value_iteration(model, abstraction)
    plan.table.meta.update(cover_size=len(cover), certified_radius=cover.certified_radius)
    return plan


def cmd_plan(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args)
    if args.algorithm == "naive":
        table = bamdp_value_iteration(model)
        _write_table(table, args, model)
    elif args.algorithm == "informed":
        if args.info_horizon == "auto":
            ih = information_horizon(model)
            if not ih.finite:
                raise InfiniteInformationHorizon(f"information horizon is infinite within H={model.horizon}")
            I = int(ih.value)
        else:
            try:
                I = int(args.info_horizon)
            except ValueError as err:
                raise UsageError("--info-horizon takes an integer or 'auto'") from err
        table = informed_value_iteration(model, I)
        _write_table(table, args, model)
    else:
        plan = _abstract_plan(args, model)
        _write_table(plan.table, args, model, plan.lifted)
    _timing(args.out, t0)
    return EXIT_OK


def cmd_abstract_plan(args) -> int:
    args.algorithm = "abstract"
    return cmd_plan(args)


def cmd_info_horizon(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args)
    ih = information_horizon(model, gamma=args.gamma)
    doc = ih.to_dict()
    doc["digest"] = model.digest()
    _emit(_dump(doc), args.out)
    _timing(args.out, t0)
    return EXIT_OK


def _read_candidates(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ProblemFileError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from err
    if isinstance(doc, dict):
        doc = doc.get("beliefs", doc.get("centers"))
    try:
        return np.array(doc, dtype=float)
    except (TypeError, ValueError) as err:
        raise ProblemFileError(f"{path}: candidates must be a list of belief vectors") from err


def cmd_cover(args) -> int:
    t0 = time.perf_counter()
    if args.greedy:
        if args.candidates:
            cand = _read_candidates(args.candidates)
        elif args.candidates_env:
            try:
                cand = reachable_beliefs(parse_env_spec(args.candidates_env))
            except ValidationError as err:
                raise UsageError(str(err)) from err
        else:
            raise UsageError("--greedy needs --candidates FILE or --candidates-env SPEC")
        if args.theta is not None and cand.shape[1] != args.theta:
            raise UsageError(f"candidates have dimension {cand.shape[1]}, --theta is {args.theta}")
        cover = build_greedy_cover(cand, args.delta)
    else:
        if args.theta is None:
            raise UsageError("lattice covers need --theta K")
        cover = build_lattice_cover(args.theta, args.delta, seed=args.seed, num_samples=args.samples)
    _emit(cover.to_json(), args.out)
    _timing(args.out, t0, num_centers=len(cover))
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    model = load_model(args)
    ground = GroundSolution.of(model)
    reports = []
    if args.prop == "voi":
        reports.append(check_value_of_information(model, ground))
    else:
        K = model.ensemble.num_hypotheses
        if args.sweep_delta:
            try:
                covers = [build_lattice_cover(K, d, seed=args.seed) for d in parse_sweep(args.sweep_delta)]
            except ValidationError as err:
                raise UsageError(str(err)) from err
        else:
            covers = [load_cover(args, K)]
        weightings = ["center", "uniform"] if args.weighting == "both" else [args.weighting]
        for cover in covers:
            for w in weightings:
                abstraction = make_abstraction(model, cover, w)
                lifted, _ = lifted_abstract_values(model, abstraction)
                if args.prop == "1":
                    r = check_approx_error_bound(model, abstraction, ground, lifted)
                elif args.prop == "3":
                    r = check_performance_loss_bound(model, abstraction, ground, lifted)
                else:
                    r = check_greedy_loss_bound(model, lifted, ground, delta=abstraction.delta)
                    r.meta["weighting"] = w
                reports.append(r)
    _emit(_dump({"digest": model.digest(), "reports": [r.to_dict() for r in reports]}), args.out)
    if args.csv:
        _emit(reports_to_csv(reports), args.csv)
    _timing(args.out, t0)
    failed = [r for r in reports if not r.passed]
    if failed:
        print(f"BoundViolation: {len(failed)} of {len(reports)} reports exceed their bound", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        model = parse_env_spec(args.env)
    except ValidationError as err:
        raise UsageError(str(err)) from err
    _emit(json.dumps(problem_dict(model), indent=1) + "\n", args.out)
    return EXIT_OK


BENCH_COLUMNS = ["instance", "algorithm", "status", "info_horizon", "hyperstates", "bamdp_backups", "mdp_backups", "backup_count"]


def cmd_bench(args) -> int:
    specs = args.env or DEFAULT_BENCH
    rows, timings = [], []
    for spec in specs:
        try:
            model = parse_env_spec(spec, max_hyperstates=args.max_hyperstates)
        except ValidationError as err:
            raise UsageError(str(err)) from err
        K = model.ensemble.num_hypotheses
        for algo in ("naive", "informed", "abstract"):
            t0 = time.perf_counter()
            row = {"instance": spec, "algorithm": algo, "status": "ok", "info_horizon": ""}
            try:
                if algo == "naive":
                    table = bamdp_value_iteration(model)
                elif algo == "informed":
                    ih = information_horizon(model)
                    if not ih.finite:
                        raise InfiniteInformationHorizon("infinite")
                    table = informed_value_iteration(model, int(ih.value))
                else:
                    cover = build_lattice_cover(K, args.delta, seed=args.seed, num_samples=0)
                    table = informed_abstract_value_iteration(model, EpistemicAbstraction(cover)).table
                row.update(
                    info_horizon=table.meta.get("info_horizon", ""),
                    hyperstates=sum(table.space.layer_sizes()),
                    bamdp_backups=table.bamdp_backups,
                    mdp_backups=table.mdp_backups,
                    backup_count=table.backup_count,
                )
            except (InfiniteInformationHorizon, AbstractHorizonInfinite) as err:
                row["status"] = type(err).__name__
            rows.append(row)
            timings.append({"instance": spec, "algorithm": algo, "wall_seconds": time.perf_counter() - t0})
    buf = io.StringIO()
    w = csv.DictWriter(buf, BENCH_COLUMNS, restval="", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _emit(buf.getvalue(), args.out)
    if args.out not in (None, "-"):
        with open(f"{args.out}.timing.json", "w") as fh:
            fh.write(_dump(timings))
    return EXIT_OK


def _add_model_args(p, grid=False):
    p.add_argument("--instance", help="problem file (JSON)")
    p.add_argument("--env", help="builtin env, e.g. chain:q=4/5,H=3 or twochain:N=4")
    p.add_argument("--max-hyperstates", type=int, default=None, help="enumeration cap (default $BAMDP_MAX_HYPERSTATES or 1e7)")
    if grid:
        p.add_argument("--backend", choices=["reachable", "grid"], default="reachable")
        p.add_argument("--resolution", type=int, help="simplex lattice resolution for the grid backend")


def _add_cover_args(p):
    p.add_argument("--cover", help="cover file written by `bamdp cover`")
    p.add_argument("--delta", type=float, help="build a lattice cover of this radius instead of reading one")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bamdp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve a BAMDP with naive, informed or abstract value iteration")
    _add_model_args(p, grid=True)
    p.add_argument("--algorithm", choices=["naive", "informed", "abstract"], default="naive")
    p.add_argument("--info-horizon", default="auto", help="integer I or 'auto' (informed only)")
    _add_cover_args(p)
    p.add_argument("--weighting", choices=["center", "uniform"], default="center")
    p.add_argument("--out", help="value table JSON (default stdout)")
    p.add_argument("--csv", help="also write the value table as CSV")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("abstract-plan", help="informed abstract value iteration over a cover")
    _add_model_args(p)
    _add_cover_args(p)
    p.add_argument("--weighting", choices=["center", "uniform"], default="center")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_abstract_plan, backend="reachable", resolution=None)

    p = sub.add_parser("info-horizon", help="information horizon with a witness trace")
    _add_model_args(p)
    p.add_argument("--gamma", type=float, default=0.0, help="optional entropy threshold")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_info_horizon)

    p = sub.add_parser("cover", help="build and certify a delta-cover of the simplex")
    p.add_argument("--theta", type=int, help="number of hypotheses K")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--greedy", action="store_true", help="farthest-point greedy cover of candidate beliefs")
    p.add_argument("--candidates", help="JSON list of candidate beliefs")
    p.add_argument("--candidates-env", help="use the reachable beliefs of a builtin env as candidates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000, help="certification samples")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cover)

    p = sub.add_parser("verify", help="measure gaps against the approximation and loss bounds")
    _add_model_args(p)
    p.add_argument("--prop", choices=["1", "2", "3", "voi"], required=True)
    _add_cover_args(p)
    p.add_argument("--sweep-delta", help="a:b:n lattice-cover sweep")
    p.add_argument("--weighting", choices=["center", "uniform", "both"], default="center")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("gen", help="write a builtin env as a problem file")
    p.add_argument("--env", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("bench", help="backup counts of all planners across instances (CSV)")
    p.add_argument("--env", action="append", help="instance spec; repeatable")
    p.add_argument("--delta", type=float, default=0.25, help="lattice cover radius for the abstract planner")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-hyperstates", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"UsageError: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemFileError, OSError) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_IO
    except BamdpError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
