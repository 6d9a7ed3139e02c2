"""Command-line entry point: plot convergence curves from trace CSVs."""

import argparse
import sys

from .aggregate import SchemaError, aggregate
from .render import render_convergence


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traceplots", description="Convergence plots from trace CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="aggregate runs and write a figure")
    p.add_argument("--inputs", action="append", required=True,
                   metavar="[LABEL=]GLOB",
                   help="one group of repeat CSVs; repeatable")
    p.add_argument("--x", choices=["evals", "wall"], default="evals")
    p.add_argument("--y", choices=["norm_gap", "grad"], default="norm_gap")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--linear-y", action="store_true",
                   help="linear y axis instead of the default log scale")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        curves = aggregate(args.inputs, args.x, args.y)
        render_convergence(curves, args.x, args.y, args.out,
                           log_y=not args.linear_y)
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}: " + ", ".join(
        f"{c.label} ({c.n_runs} runs)" for c in curves))
    return 0


if __name__ == "__main__":
    sys.exit(main())
