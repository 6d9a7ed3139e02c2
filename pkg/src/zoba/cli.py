"""Command-line entry points: run, grid, check, fe-count.

Exit codes: 0 success, 2 configuration error, 3 divergence-only failures.
"""

import argparse
import json
import sys

from .problem import ConfigError
from .harness import ExperimentConfig, check_estimators, grid_search, run_experiment
from .solvers import fe_per_iteration_hfzoba, fe_per_iteration_zoba

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return ExperimentConfig.from_json(fh.read())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise ConfigError(f"bad config {path}: {err}")


def cmd_run(args) -> int:
    config = _load_config(args.config)
    traces = run_experiment(config)
    diverged = sum(1 for t in traces if t.meta.get("diverged"))
    gaps = [t.final_norm_gap for t in traces]
    print(f"{config.algorithm}: {len(traces)} repeat(s), "
          f"final normalized gap mean {sum(gaps) / len(gaps):.4g}, "
          f"{diverged} diverged")
    return EXIT_DIVERGED if diverged == len(traces) else EXIT_OK


def cmd_grid(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    grid = doc.pop("grid", None)
    if not grid:
        raise ConfigError("grid config needs a non-empty 'grid' section")
    base = ExperimentConfig.from_json(json.dumps(doc))
    best, leaderboard = grid_search(base, grid)
    for entry in leaderboard:
        marks = {k: entry["params"][k] for k in grid}
        print(f"  score={entry['score']:.6g}  {marks}"
              + (f"  error={entry['error']}" if entry["error"] else ""))
    print(f"best: {json.dumps({k: best.params[k] for k in grid})}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"best_params": best.params,
                       "leaderboard": [{"params": e["params"], "score": e["score"],
                                        "error": e["error"]} for e in leaderboard]},
                      fh, indent=2)
    return EXIT_OK


def cmd_check(args) -> int:
    p, d = (int(s) for s in args.dims.split(","))
    report = check_estimators(p=p, d=d, trials=args.trials, tol_se=args.tolerance)
    for name, res in report["estimators"].items():
        status = "PASS" if res["pass"] else "FAIL"
        print(f"  {status}  {name:20s} max deviation {res['max_dev_se']:.2f} SE")
    print("PASS" if report["passed"] else "FAIL")
    return EXIT_OK


def cmd_fe_count(args) -> int:
    fn = fe_per_iteration_zoba if args.algo == "zoba" else fe_per_iteration_hfzoba
    print(fn(args.b1, args.l1, args.b2, args.l2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zoba",
                                     description="Single-loop zeroth-order bilevel optimizers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(fn=cmd_run)

    p_grid = sub.add_parser("grid", help="grid-search a parameter lattice")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--out", default=None, help="write leaderboard JSON here")
    p_grid.set_defaults(fn=cmd_grid)

    p_check = sub.add_parser("check", help="Monte-Carlo estimator checks")
    p_check.add_argument("--dims", default="5,5", help="p,d")
    p_check.add_argument("--trials", type=int, default=100_000)
    p_check.add_argument("--tolerance", type=float, default=3.0,
                         help="tolerance in standard errors")
    p_check.set_defaults(fn=cmd_check)

    p_fe = sub.add_parser("fe-count", help="function evaluations per iteration")
    p_fe.add_argument("--algo", choices=["zoba", "hfzoba"], required=True)
    p_fe.add_argument("--b1", type=int, default=1)
    p_fe.add_argument("--b2", type=int, default=1)
    p_fe.add_argument("--l1", type=int, default=1)
    p_fe.add_argument("--l2", type=int, default=1)
    p_fe.set_defaults(fn=cmd_fe_count)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
