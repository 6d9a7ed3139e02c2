"""Convergence plots for solver trace CSVs."""

from .aggregate import (GroupCurve, SchemaError, Trace, aggregate,
                        aggregate_group, expand_group, read_trace)
from .render import render_convergence

__all__ = ["GroupCurve", "SchemaError", "Trace", "aggregate",
           "aggregate_group", "expand_group", "read_trace",
           "render_convergence"]
