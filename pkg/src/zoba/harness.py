"""Experiment runner: configs, seeding, metrics, grid search, estimator checks.

A run is fully determined by one master seed: repeat r derives its own seed,
from which the initialization and all solver sub-streams follow.  Metrics are
computed against the analytic oracles of the quadratic benchmark and never
touch the evaluation ledger.
"""

import itertools
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problem import ConfigError, EvalLedger, RngStreams, StepSchedule
from .estimators import EstimatorBatch, sample_direction_pool
from .solvers import (DivergenceError, HfZobaParams, ZobaParams,
                      fe_per_iteration_hfzoba, fe_per_iteration_zoba,
                      hfzoba_run, zoba_run)
from .quadratic import (generate_instance, inner_grad, oracle_from_instance,
                        psi_and_grad, v_star, z_star)
from .trace import RunTrace, TraceRow


def normalized_gap(psi_k: float, psi0: float, min_psi: float) -> float:
    """(Psi(x_k) - min Psi) / (Psi(x_0) - min Psi)."""
    if not psi0 > min_psi:
        raise ConfigError("degenerate start: Psi(x0) must exceed min Psi")
    return (psi_k - min_psi) / (psi0 - min_psi)


def _schedule_from_spec(spec) -> StepSchedule:
    if isinstance(spec, StepSchedule):
        return spec
    if isinstance(spec, (int, float)):
        return StepSchedule("constant", float(spec))
    if isinstance(spec, dict):
        return StepSchedule(spec.get("kind", "constant"), float(spec["base"]),
                            float(spec.get("exponent", 0.0)))
    raise ConfigError(f"cannot interpret schedule spec {spec!r}")


def params_from_dict(algorithm: str, d: dict):
    common = dict(gamma=_schedule_from_spec(d["gamma"]),
                  rho=_schedule_from_spec(d["rho"]),
                  h=_schedule_from_spec(d["h"]),
                  b1=int(d.get("b1", 1)), b2=int(d.get("b2", 1)),
                  l1=int(d.get("l1", 1)), l2=int(d.get("l2", 1)))
    if algorithm == "zoba":
        return ZobaParams(**common)
    if algorithm == "hfzoba":
        return HfZobaParams(h_hat=_schedule_from_spec(d["h_hat"]),
                            v_zero_threshold=float(d.get("v_zero_threshold", 1e-12)),
                            **common)
    raise ConfigError(f"unknown algorithm {algorithm!r}")


@dataclass
class ExperimentConfig:
    algorithm: str
    instance: dict          # p, d, n, m, seed
    params: dict            # schedule specs + batch/direction counts
    budget: int
    master_seed: int
    repeats: int = 1
    init_box: tuple = (-5.0, 10.0)
    max_iterations: int = 10**6
    metric_stride: int = 1
    record_wall: bool = True
    output_dir: str | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.algorithm not in ("zoba", "hfzoba"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        if "master_seed" not in doc:
            raise ConfigError("master_seed is mandatory")
        kwargs = {k: doc[k] for k in
                  ("algorithm", "instance", "params", "budget", "master_seed")}
        for opt in ("repeats", "init_box", "max_iterations", "metric_stride",
                    "record_wall", "output_dir"):
            if opt in doc:
                kwargs[opt] = doc[opt]
        if "init_box" in kwargs:
            kwargs["init_box"] = tuple(kwargs["init_box"])
        return ExperimentConfig(**kwargs)

    def solver_params(self):
        return params_from_dict(self.algorithm, self.params)

    def fe_per_iteration(self) -> int:
        p = self.params
        args = (int(p.get("b1", 1)), int(p.get("l1", 1)),
                int(p.get("b2", 1)), int(p.get("l2", 1)))
        if self.algorithm == "zoba":
            return fe_per_iteration_zoba(*args)
        return fe_per_iteration_hfzoba(*args)


class AnalyticMetrics:
    """Per-iteration trace rows from the instance's closed-form oracles."""

    def __init__(self, inst, min_psi: float = 0.0, stride: int = 1,
                 record_wall: bool = True):
        self.inst = inst
        self.min_psi = min_psi
        self.stride = max(1, stride)
        self.record_wall = record_wall
        self.psi0 = None
        self._t0 = time.perf_counter_ns()

    def __call__(self, state):
        psi, grad_psi = psi_and_grad(self.inst, state.x)
        if self.psi0 is None:
            self.psi0 = psi
        if state.k % self.stride != 0:
            return None
        zs = z_star(self.inst, state.x)
        vs = v_star(self.inst, state.x)
        wall = time.perf_counter_ns() - self._t0 if self.record_wall else 0
        return TraceRow(
            k=state.k,
            evals=state.ledger.total(),
            wall_ns=wall,
            psi=psi,
            psi_gap=psi - self.min_psi,
            norm_gap=normalized_gap(psi, self.psi0, self.min_psi),
            grad_psi_norm=float(np.linalg.norm(grad_psi)),
            z_err=float(np.linalg.norm(state.z - zs)),
            v_err=float(np.linalg.norm(state.v - vs)),
        )


def repeat_seed(master_seed: int, r: int) -> int:
    """Derived per-repeat seed; independent of the parameter configuration."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(1000 + r,)).generate_state(1)[0])


def sample_init(inst, seed: int, init_box) -> tuple:
    """x0, z0 uniform on the init box; v0 = 0."""
    streams = RngStreams(seed)
    lo, hi = init_box
    x0 = lo + (hi - lo) * streams.init.random(inst.d)
    z0 = lo + (hi - lo) * streams.init.random(inst.p)
    v0 = np.zeros(inst.p)
    return x0, z0, v0


def run_single(config: ExperimentConfig, r: int, inst=None) -> RunTrace:
    """One repeat: derive the seed, initialize, run to budget, build the trace."""
    if inst is None:
        inst = generate_instance(**config.instance)
    oracle = oracle_from_instance(inst)
    seed = repeat_seed(config.master_seed, r)
    init = sample_init(inst, seed, config.init_box)
    streams = RngStreams(seed)
    metrics = AnalyticMetrics(inst, stride=config.metric_stride,
                              record_wall=config.record_wall)
    params = config.solver_params()
    run_fn = zoba_run if config.algorithm == "zoba" else hfzoba_run
    meta = {"algorithm": config.algorithm, "params": config.params,
            "seed": seed, "repeat": r, "instance": config.instance}
    try:
        _, rows = run_fn(oracle, params, init, config.budget, streams,
                         metrics=metrics, max_iterations=config.max_iterations)
    except DivergenceError as err:
        rows = list(err.partial_rows or [])
        last = err.last_state
        rows.append(TraceRow(k=last.k + 1, evals=last.ledger.total(),
                             wall_ns=0, psi=float("nan"), psi_gap=float("nan"),
                             norm_gap=1.0, grad_psi_norm=float("nan"),
                             z_err=float("nan"), v_err=float("nan"), diverged=1))
        meta["diverged"] = True
    return RunTrace(rows=rows, meta=meta)


def run_experiment(config: ExperimentConfig):
    """All repeats of one configuration; optionally persists CSVs + summary."""
    inst = generate_instance(**config.instance)
    traces = [run_single(config, r, inst) for r in range(config.repeats)]
    if config.output_dir is not None:
        out = Path(config.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for r, trace in enumerate(traces):
                trace.write_csv(out / f"run_{r:02d}.csv")
            summary = summarize(traces)
            (out / "summary.json").write_text(json.dumps(summary, indent=2))
        except OSError as err:
            raise OSError(f"writing results under {config.output_dir!r}: {err}") from err
    return traces


def summarize(traces) -> dict:
    gaps = [min(t.final_norm_gap, 1.0) if t.meta.get("diverged")
            else t.final_norm_gap for t in traces]
    return {
        "final_norm_gap_mean": float(np.mean(gaps)),
        "final_norm_gap_std": float(np.std(gaps)),
        "final_norm_gaps": [float(g) for g in gaps],
        "diverged": int(sum(1 for t in traces if t.meta.get("diverged"))),
        "repeats": len(traces),
    }


def grid_search(base_config: ExperimentConfig, grid: dict):
    """Exhaustive search over a parameter lattice with shared initializations.

    grid maps parameter names (keys of config.params) to candidate lists.
    Score is the mean final normalized gap over repeats, diverged runs
    clipped to 1.  Ties break toward smaller gamma, then smaller rho.
    Returns (best config, leaderboard sorted ascending by score).
    """
    names = sorted(grid)
    if not names or any(len(grid[n]) == 0 for n in names):
        raise ConfigError("grid must be a non-empty lattice")
    inst = generate_instance(**base_config.instance)
    leaderboard = []
    for combo in itertools.product(*(grid[n] for n in names)):
        params = dict(base_config.params)
        params.update(dict(zip(names, combo)))
        config = ExperimentConfig(
            algorithm=base_config.algorithm, instance=base_config.instance,
            params=params, budget=base_config.budget,
            master_seed=base_config.master_seed, repeats=base_config.repeats,
            init_box=base_config.init_box,
            max_iterations=base_config.max_iterations,
            metric_stride=base_config.metric_stride,
            record_wall=base_config.record_wall)
        entry = {"params": params, "config": config, "error": None}
        try:
            traces = [run_single(config, r, inst) for r in range(config.repeats)]
            entry["score"] = summarize(traces)["final_norm_gap_mean"]
        except Exception as err:  # per-run failures recorded, not fatal
            entry["error"] = str(err)
            entry["score"] = 1.0
        leaderboard.append(entry)

    def _base(params, name):
        spec = params.get(name, 0.0)
        return _schedule_from_spec(spec).base if spec is not None else 0.0

    leaderboard.sort(key=lambda e: (e["score"],
                                    _base(e["params"], "gamma"),
                                    _base(e["params"], "rho")))
    return leaderboard[0]["config"], leaderboard


# -- Monte-Carlo estimator checks --

def check_estimators(p: int = 5, d: int = 5, trials: int = 100_000,
                     tol_se: float = 3.0, h: float = 1e-3, hbar: float = 0.5,
                     seed: int = 2024, chunks: int = 200,
                     oracle=None, targets=None, point=None) -> dict:
    """Monte-Carlo means of every surrogate against analytic values.

    Runs the real estimator code in chunks (each chunk is one minibatch of
    single-direction samples) and reports the max componentwise deviation
    from the analytic value in standard-error units; an estimator passes iff
    that deviation is at most tol_se.  Exact estimators (zero spread) must
    match exactly.  A custom (oracle, targets, point) triple may be injected
    for sensitivity tests.
    """
    if trials < 1000:
        raise ConfigError("trials must be >= 1000")
    chunk_size = trials // chunks
    if chunk_size < 1:
        raise ConfigError("more chunks than trials")

    if oracle is None:
        m = n = max(4 * max(p, d), 20)
        inst = generate_instance(seed, p, d, n, m)
        oracle = oracle_from_instance(inst)
        rng = np.random.default_rng(seed + 1)
        z = rng.normal(size=p)
        x = rng.normal(size=d)
        v = rng.normal(size=p)
        r_out = inst.C @ z - inst.D @ x - inst.b
        hess_zz_true = inst.A.T @ inst.A / inst.m
        hess_xz_true = -inst.B.T @ inst.A / inst.m
        targets = {
            "grad_central_inner": inner_grad(inst, z, x),
            "grad_z_f": inst.C.T @ r_out / inst.n,
            "grad_x_f": -inst.D.T @ r_out / inst.n + (x - inst.x_bar),
            "hess_zz": hess_zz_true,
            "hess_xz": hess_xz_true,
            "hvp_zz": hess_zz_true @ v,
            "hvp_xz": hess_xz_true @ v,
        }
    else:
        if targets is None or point is None:
            raise ConfigError("custom oracle needs targets and point")
        z, x, v = point

    streams = RngStreams(seed)
    sums = {name: None for name in targets}
    sq_sums = {name: None for name in targets}

    for _ in range(chunks):
        ledger = EvalLedger()
        pool = sample_direction_pool(streams.directions_w, streams.directions_u,
                                     chunk_size, 1, p, d)
        xi = [oracle.sample_inner_noise(streams.noise_xi) for _ in range(chunk_size)]
        zeta = [oracle.sample_outer_noise(streams.noise_zeta) for _ in range(chunk_size)]
        batch = EstimatorBatch(oracle, ledger, z, x, h, pool, xi, zeta)
        values = {}
        if "grad_central_inner" in targets:
            values["grad_central_inner"] = batch.grad_central_inner(chunk_size, 1)
        if "hess_zz" in targets:
            values["hess_zz"] = batch.hess_zz_estimate(chunk_size, 1)
        if "hess_xz" in targets:
            values["hess_xz"] = batch.hess_xz_estimate(chunk_size, 1)
        if "grad_z_f" in targets:
            values["grad_z_f"] = batch.grad_forward("f-in-z", chunk_size, 1)
        if "grad_x_f" in targets:
            values["grad_x_f"] = batch.grad_forward("f-in-x", chunk_size, 1)
        if "hvp_zz" in targets or "hvp_xz" in targets:
            shifted = (z + hbar * v, x)
            gz0 = batch.grad_forward("g-in-z", chunk_size, 1)
            gx0 = batch.grad_forward("g-in-x", chunk_size, 1)
            gz1 = batch.grad_forward("g-in-z", chunk_size, 1, base=shifted, tag="shift")
            gx1 = batch.grad_forward("g-in-x", chunk_size, 1, base=shifted, tag="shift")
            values["hvp_zz"] = (gz1 - gz0) / hbar
            values["hvp_xz"] = (gx1 - gx0) / hbar
        for name, val in values.items():
            if sums[name] is None:
                sums[name] = np.zeros_like(val)
                sq_sums[name] = np.zeros_like(val)
            sums[name] += val
            sq_sums[name] += val * val

    report = {"trials": chunks * chunk_size, "chunks": chunks, "h": h,
              "tol_se": tol_se, "estimators": {}, "passed": True}
    for name, target in targets.items():
        mean = sums[name] / chunks
        var = (sq_sums[name] / chunks - mean * mean) * chunks / max(chunks - 1, 1)
        se = np.sqrt(np.maximum(var, 0.0) / chunks)
        dev = np.abs(mean - np.asarray(target))
        with np.errstate(divide="ignore", invalid="ignore"):
            dev_se = np.where(se > 0, dev / se, np.where(dev == 0, 0.0, np.inf))
        max_dev_se = float(np.max(dev_se))
        ok = bool(max_dev_se <= tol_se)
        report["estimators"][name] = {"max_dev_se": max_dev_se,
                                      "max_abs_dev": float(np.max(dev)),
                                      "pass": ok}
        report["passed"] = report["passed"] and ok
    return report
