"""Read solver trace CSVs and aggregate repeats into mean/std curves.

The input format is the fixed ten-column trace schema written by the solver
harness (k, evals, wall_ns, psi, psi_gap, norm_gap, grad_psi_norm, z_err,
v_err, diverged).  Repeats of one configuration log metrics on an identical
cumulative-evaluation grid, so aggregation is plain columnwise statistics
with no resampling.
"""

import csv
import glob
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA = ["k", "evals", "wall_ns", "psi", "psi_gap", "norm_gap",
          "grad_psi_norm", "z_err", "v_err", "diverged"]

X_COLUMNS = {"evals": "evals", "wall": "wall_ns"}
Y_COLUMNS = {"norm_gap": "norm_gap", "grad": "grad_psi_norm"}


class SchemaError(ValueError):
    """A CSV does not follow the trace schema; names the file and column."""


@dataclass
class Trace:
    path: str
    columns: dict  # column name -> 1-D float array


@dataclass
class GroupCurve:
    """Aggregated repeats of one labelled group on a shared x grid."""
    label: str
    x: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_runs: int = 0
    paths: list = field(default_factory=list)


def read_trace(path) -> Trace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {SCHEMA}")
        if header != SCHEMA:
            bad = next((c for c in header if c not in SCHEMA), None)
            missing = next((c for c in SCHEMA if c not in header), None)
            column = bad or missing
            raise SchemaError(f"{path}: column {column!r} breaks the trace schema")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = {}
    for idx, name in enumerate(SCHEMA):
        try:
            data[name] = np.array([float(row[idx]) for row in rows])
        except (ValueError, IndexError):
            raise SchemaError(f"{path}: column {name!r} has a non-numeric cell")
    return Trace(path=str(path), columns=data)


def expand_group(spec: str):
    """One --inputs argument: 'label=glob' or a bare glob.

    A bare glob takes its label from the parent directory of the matches.
    """
    if "=" in spec:
        label, pattern = spec.split("=", 1)
    else:
        label, pattern = None, spec
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise SchemaError(f"no files match {pattern!r}")
    if label is None:
        label = Path(paths[0]).resolve().parent.name
    return label, paths


def aggregate_group(label: str, paths, x_col: str, y_col: str) -> GroupCurve:
    """Columnwise mean and population std across repeats.

    Requires every repeat to share the x grid exactly; the per-iteration
    evaluation count is deterministic, so a mismatch means the runs do not
    belong to one configuration.
    """
    traces = [read_trace(p) for p in paths]
    x = traces[0].columns[x_col]
    for t in traces[1:]:
        if not np.array_equal(t.columns[x_col], x):
            raise SchemaError(
                f"{t.path}: column {x_col!r} grid differs from {traces[0].path}; "
                "repeats of one configuration share their x grid")
    ys = np.stack([t.columns[y_col] for t in traces])
    return GroupCurve(label=label, x=x, mean=ys.mean(axis=0),
                      std=ys.std(axis=0), n_runs=len(traces), paths=list(paths))


def aggregate(input_specs, x_axis: str, y_axis: str):
    """Resolve --inputs specs into labelled curves for the chosen axes."""
    if x_axis not in X_COLUMNS:
        raise SchemaError(f"unknown x axis {x_axis!r}, expected one of "
                          f"{sorted(X_COLUMNS)}")
    if y_axis not in Y_COLUMNS:
        raise SchemaError(f"unknown y axis {y_axis!r}, expected one of "
                          f"{sorted(Y_COLUMNS)}")
    if not input_specs:
        raise SchemaError("at least one --inputs group is required")
    curves = []
    for spec in input_specs:
        label, paths = expand_group(spec)
        curves.append(aggregate_group(label, paths,
                                      X_COLUMNS[x_axis], Y_COLUMNS[y_axis]))
    return curves
