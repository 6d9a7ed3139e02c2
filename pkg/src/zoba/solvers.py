"""Single-loop solvers: ZOBA and its Hessian-free variant HF-ZOBA.

Both algorithms update the triple (z, v, x) once per iteration, with all
three search directions computed from the same old state (delayed
information).  z tracks the inner minimizer, v tracks the inverse-Hessian
action on the outer inner-gradient, and x descends the resulting
hypergradient surrogate.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .problem import BilevelOracle, ConfigError, EvalLedger, RngStreams, StepSchedule
from .estimators import EstimatorBatch, sample_direction_pool

DIVERGENCE_NORM_BOUND = 1e12
DEFAULT_MAX_ITERATIONS = 10**6


class DivergenceError(RuntimeError):
    """An update produced a non-finite or absurdly large iterate.

    Carries the last finite state and, when raised from a run loop, the
    partial list of recorded rows.
    """

    def __init__(self, message, last_state=None, partial_rows=None):
        super().__init__(message)
        self.last_state = last_state
        self.partial_rows = partial_rows


@dataclass
class SolverState:
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    k: int
    ledger: EvalLedger


@dataclass(frozen=True)
class ZobaParams:
    gamma: StepSchedule
    rho: StepSchedule
    h: StepSchedule
    b1: int = 1
    b2: int = 1
    l1: int = 1
    l2: int = 1

    def __post_init__(self):
        if min(self.b1, self.b2, self.l1, self.l2) < 1:
            raise ConfigError("batch sizes and direction counts must be >= 1")


@dataclass(frozen=True)
class HfZobaParams:
    gamma: StepSchedule
    rho: StepSchedule
    h: StepSchedule
    h_hat: StepSchedule
    b1: int = 1
    b2: int = 1
    l1: int = 1
    l2: int = 1
    v_zero_threshold: float = 1e-12

    def __post_init__(self):
        if min(self.b1, self.b2, self.l1, self.l2) < 1:
            raise ConfigError("batch sizes and direction counts must be >= 1")
        if not self.v_zero_threshold > 0:
            raise ConfigError("v_zero_threshold must be positive")
        # In power-decay mode, convergence needs h to decay at least as fast
        # as h_hat; constant schedules are also supported, so only warn.
        if (self.h.kind == "power-decay" and self.h_hat.kind == "power-decay"
                and self.h.exponent < self.h_hat.exponent):
            warnings.warn("h should decay at least as fast as h_hat "
                          "(exponent of h < exponent of h_hat)", stacklevel=2)


def fe_per_iteration_zoba(b1: int, l1: int, b2: int, l2: int) -> int:
    """Fresh function evaluations per ZOBA iteration."""
    if min(b1, b2, l1, l2) < 1:
        raise ConfigError("all counts must be >= 1")
    return b1 * (4 * l1 + 1) + b2 * (2 * l2 + 1)


def fe_per_iteration_hfzoba(b1: int, l1: int, b2: int, l2: int) -> int:
    """Fresh function evaluations per HF-ZOBA iteration."""
    if min(b1, b2, l1, l2) < 1:
        raise ConfigError("all counts must be >= 1")
    return 2 * b1 * (2 * l1 + 1) + b2 * (2 * l2 + 1)


def hbar_from_v(h_hat: float, v: np.ndarray, threshold: float = 1e-12) -> float:
    """Normalized HVP step: h_hat / ||v|| when v is nonzero, else h_hat."""
    if not h_hat > 0:
        raise ConfigError("h_hat must be positive")
    norm_v = float(np.linalg.norm(v))
    if norm_v > threshold:
        return h_hat / norm_v
    return h_hat


def _sample_iteration_inputs(oracle, params, streams):
    b = max(params.b1, params.b2)
    l = max(params.l1, params.l2)
    pool = sample_direction_pool(streams.directions_w, streams.directions_u,
                                 b, l, oracle.inner_dim, oracle.outer_dim)
    xi = [oracle.sample_inner_noise(streams.noise_xi) for _ in range(b)]
    zeta = [oracle.sample_outer_noise(streams.noise_zeta) for _ in range(b)]
    return pool, xi, zeta


def _apply_updates(state, new_values, order):
    values = {"z": state.z, "v": state.v, "x": state.x}
    for name in order:
        values[name] = new_values[name]
    for vec in values.values():
        if not np.all(np.isfinite(vec)) or np.linalg.norm(vec) > DIVERGENCE_NORM_BOUND:
            raise DivergenceError("iterate diverged", last_state=state)
    return SolverState(x=values["x"], z=values["z"], v=values["v"],
                       k=state.k + 1, ledger=state.ledger)


def zoba_step(state: SolverState, oracle: BilevelOracle, params: ZobaParams,
              streams: RngStreams, update_order=("z", "v", "x")) -> SolverState:
    """One ZOBA iteration: all three directions from the old (z, v, x)."""
    k = state.k
    h = params.h.value(k)
    pool, xi, zeta = _sample_iteration_inputs(oracle, params, streams)
    batch = EstimatorBatch(oracle, state.ledger, state.z, state.x, h, pool, xi, zeta)

    d_z = batch.grad_central_inner(params.b1, params.l1)
    hess_zz = batch.hess_zz_estimate(params.b1, params.l1)
    hess_xz = batch.hess_xz_estimate(params.b1, params.l1)
    grad_z_f = batch.grad_forward("f-in-z", params.b2, params.l2)
    grad_x_f = batch.grad_forward("f-in-x", params.b2, params.l2)

    d_v = hess_zz @ state.v + grad_z_f
    d_x = hess_xz @ state.v + grad_x_f

    rho = params.rho.value(k)
    gamma = params.gamma.value(k)
    new_values = {"z": state.z - rho * d_z,
                  "v": state.v - rho * d_v,
                  "x": state.x - gamma * d_x}
    state.ledger.end_iteration()
    return _apply_updates(state, new_values, update_order)


def hfzoba_step(state: SolverState, oracle: BilevelOracle, params: HfZobaParams,
                streams: RngStreams, update_order=("z", "v", "x")) -> SolverState:
    """One HF-ZOBA iteration: Hessian-vector products by first-order
    differences of forward-difference gradient surrogates, sharing the base
    surrogates and the direction pool across both products."""
    k = state.k
    h = params.h.value(k)
    hbar = hbar_from_v(params.h_hat.value(k), state.v, params.v_zero_threshold)
    pool, xi, zeta = _sample_iteration_inputs(oracle, params, streams)
    batch = EstimatorBatch(oracle, state.ledger, state.z, state.x, h, pool, xi, zeta)

    grad_z_g = batch.grad_forward("g-in-z", params.b1, params.l1)
    grad_x_g = batch.grad_forward("g-in-x", params.b1, params.l1)
    shifted = (state.z + hbar * state.v, state.x)
    grad_z_g_shift = batch.grad_forward("g-in-z", params.b1, params.l1,
                                        base=shifted, tag="shift")
    grad_x_g_shift = batch.grad_forward("g-in-x", params.b1, params.l1,
                                        base=shifted, tag="shift")
    hvp_zz = (grad_z_g_shift - grad_z_g) / hbar
    hvp_xz = (grad_x_g_shift - grad_x_g) / hbar
    grad_z_f = batch.grad_forward("f-in-z", params.b2, params.l2)
    grad_x_f = batch.grad_forward("f-in-x", params.b2, params.l2)

    d_z = grad_z_g
    d_v = hvp_zz + grad_z_f
    d_x = hvp_xz + grad_x_f

    rho = params.rho.value(k)
    gamma = params.gamma.value(k)
    new_values = {"z": state.z - rho * d_z,
                  "v": state.v - rho * d_v,
                  "x": state.x - gamma * d_x}
    state.ledger.end_iteration()
    return _apply_updates(state, new_values, update_order)


def _run(step_fn, cost, oracle, params, init, budget, streams,
         metrics=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    if budget < cost:
        raise ConfigError(f"budget {budget} below one iteration's cost {cost}")
    x0, z0, v0 = init
    state = SolverState(x=np.asarray(x0, dtype=float).copy(),
                        z=np.asarray(z0, dtype=float).copy(),
                        v=np.asarray(v0, dtype=float).copy(),
                        k=0, ledger=EvalLedger())
    rows = []
    if metrics is not None:
        row = metrics(state)
        if row is not None:
            rows.append(row)
    while state.ledger.total() + cost <= budget and state.k < max_iterations:
        try:
            state = step_fn(state, oracle, params, streams)
        except DivergenceError as err:
            raise DivergenceError(str(err), last_state=err.last_state,
                                  partial_rows=rows) from None
        if metrics is not None:
            row = metrics(state)
            if row is not None:
                rows.append(row)
    return state, rows


def zoba_run(oracle, params: ZobaParams, init, budget, streams,
             metrics=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    """Run ZOBA to the evaluation budget (or iteration cap).

    ``init`` is (x0, z0, v0).  Returns (final state, metric rows); rows are
    produced by the caller-supplied hook, one at the initial state and one
    after every iteration.
    """
    cost = fe_per_iteration_zoba(params.b1, params.l1, params.b2, params.l2)
    return _run(zoba_step, cost, oracle, params, init, budget, streams,
                metrics, max_iterations)


def hfzoba_run(oracle, params: HfZobaParams, init, budget, streams,
               metrics=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    """Run HF-ZOBA to the evaluation budget (or iteration cap)."""
    cost = fe_per_iteration_hfzoba(params.b1, params.l1, params.b2, params.l2)
    return _run(hfzoba_step, cost, oracle, params, init, budget, streams,
                metrics, max_iterations)
