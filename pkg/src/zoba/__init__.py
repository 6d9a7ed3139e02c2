"""Single-loop zeroth-order bilevel optimization.

Two solvers that minimize a value function through noisy evaluations of an
inner and an outer objective only: one with explicit finite-difference
Hessian-block surrogates, and a Hessian-free variant built on first-order
differences of gradient surrogates.  Includes a synthetic quadratic
benchmark with analytic oracles and an experiment harness.
"""

from .problem import (BilevelOracle, ConfigError, EvalLedger, RngStreams,
                      StepSchedule, constant, power_decay, schedule_value,
                      standard_normal, substream)
from .estimators import (DirectionPool, EstimatorBatch, EstimatorCacheError,
                         hvp_forward, sample_direction_pool)
from .solvers import (DivergenceError, HfZobaParams, SolverState, ZobaParams,
                      fe_per_iteration_hfzoba, fe_per_iteration_zoba,
                      hbar_from_v, hfzoba_run, hfzoba_step, zoba_run, zoba_step)
from .quadratic import (QuadraticInstance, generate_instance, inner_grad,
                        oracle_from_instance, psi_and_grad, v_star, z_star)
from .trace import CSV_COLUMNS, RunTrace, TraceRow, parse_csv, read_csv
from .harness import (AnalyticMetrics, ExperimentConfig, check_estimators,
                      grid_search, normalized_gap, run_experiment, run_single,
                      summarize)

__all__ = [
    "BilevelOracle", "ConfigError", "EvalLedger", "RngStreams", "StepSchedule",
    "constant", "power_decay", "schedule_value", "standard_normal", "substream",
    "DirectionPool", "EstimatorBatch", "EstimatorCacheError", "hvp_forward",
    "sample_direction_pool",
    "DivergenceError", "HfZobaParams", "SolverState", "ZobaParams",
    "fe_per_iteration_hfzoba", "fe_per_iteration_zoba", "hbar_from_v",
    "hfzoba_run", "hfzoba_step", "zoba_run", "zoba_step",
    "QuadraticInstance", "generate_instance", "inner_grad",
    "oracle_from_instance", "psi_and_grad", "v_star", "z_star",
    "CSV_COLUMNS", "RunTrace", "TraceRow", "parse_csv", "read_csv",
    "AnalyticMetrics", "ExperimentConfig", "check_estimators", "grid_search",
    "normalized_gap", "run_experiment", "run_single", "summarize",
]
