"""End-to-end acceptance checks.

Each test covers one acceptance criterion and prints a single PASS/FAIL
line (visible under pytest -s, or in the failure report otherwise).
Constant step sizes for the convergence criterion were selected by a grid
search over gamma, rho in {1e-4, 1e-3, 1e-2} on the same instance; the
winning values are hard-coded below.
"""

import itertools
import time

import numpy as np

from zoba import (EvalLedger, ExperimentConfig, HfZobaParams, RngStreams,
                  SolverState, ZobaParams, check_estimators, constant,
                  fe_per_iteration_hfzoba, fe_per_iteration_zoba,
                  generate_instance, hbar_from_v, hfzoba_step, inner_grad,
                  oracle_from_instance, psi_and_grad, run_experiment,
                  sample_direction_pool, v_star, z_star, zoba_step)
from zoba.estimators import EstimatorBatch, hvp_forward
from zoba.harness import summarize


def report(name, ok, detail=""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def fresh_state(inst):
    return SolverState(x=np.ones(inst.d), z=np.ones(inst.p),
                       v=np.full(inst.p, 0.1), k=0, ledger=EvalLedger())


# 16 batch/direction combinations drawn from {1, 2, 5, 10}
COUNT_GRID = [(a, b, b, a) for a, b in itertools.product([1, 2, 5, 10], repeat=2)]

INSTANCE = dict(seed=3, p=10, d=10, n=200, m=200)
MASTER_SEED = 42
SEEDS = 10


def test_evaluation_count_exactness():
    t0 = time.perf_counter()
    inst = generate_instance(5, 4, 4, 30, 30)
    oracle = oracle_from_instance(inst)
    ok = True
    for b1, l1, b2, l2 in COUNT_GRID:
        zp = ZobaParams(gamma=constant(1e-3), rho=constant(1e-3),
                        h=constant(1e-3), b1=b1, b2=b2, l1=l1, l2=l2)
        state = zoba_step(fresh_state(inst), oracle, zp, RngStreams(0))
        ok &= state.ledger.per_iteration_last == fe_per_iteration_zoba(b1, l1, b2, l2)
        hp = HfZobaParams(gamma=constant(1e-3), rho=constant(1e-3),
                          h=constant(1e-3), h_hat=constant(1e-3),
                          b1=b1, b2=b2, l1=l1, l2=l2)
        state = hfzoba_step(fresh_state(inst), oracle, hp, RngStreams(0))
        ok &= state.ledger.per_iteration_last == fe_per_iteration_hfzoba(b1, l1, b2, l2)
    elapsed = time.perf_counter() - t0
    report("evaluation-count-exactness", ok and elapsed < 10,
           f"16 combos, {elapsed:.2f}s")


def test_estimator_unbiasedness():
    t0 = time.perf_counter()
    result = check_estimators(p=5, d=5, trials=100_000, tol_se=3.0, h=1e-3)
    elapsed = time.perf_counter() - t0
    worst = max(r["max_dev_se"] for r in result["estimators"].values())
    report("estimator-unbiasedness", result["passed"] and elapsed < 60,
           f"worst deviation {worst:.2f} SE, {elapsed:.1f}s")


def test_quadratic_exactness():
    t0 = time.perf_counter()
    inst = generate_instance(7, 4, 4, 30, 30)
    oracle = oracle_from_instance(inst)
    rng = np.random.default_rng(1)
    z, x, v = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)

    # full-gradient deterministic surrogate so one direction is exact
    full = lambda zz, xx, _tok: float(np.mean(
        [oracle.eval_g(zz, xx, j) for j in range(inst.m)]))
    det = oracle_from_instance(inst)
    det = type(det)(inner_dim=4, outer_dim=4, eval_g=full, eval_f=det.eval_f,
                    sample_inner_noise=lambda r: 0, sample_outer_noise=lambda r: 0)
    pool = sample_direction_pool(RngStreams(2).directions_w,
                                 RngStreams(2).directions_u, 1, 1, 4, 4)
    batch = EstimatorBatch(det, EvalLedger(), z, x, 1e-3, pool, [0], [0])
    w = pool.w[0, 0]
    grad_g = inner_grad(inst, z, x)
    ok = np.max(np.abs(batch.grad_central_inner(1, 1)
                       - np.outer(w, w) @ grad_g)) <= 1e-8

    hbar = hbar_from_v(1e-3, v)
    hvp = hvp_forward(lambda zz, xx: inner_grad(inst, zz, xx), z, x, v, hbar)
    hess = inst.A.T @ inst.A / inst.m
    ok &= np.max(np.abs(hvp - hess @ v)) <= 1e-8
    elapsed = time.perf_counter() - t0
    report("quadratic-exactness", bool(ok) and elapsed < 1.0, f"{elapsed:.3f}s")


def test_analytic_oracle_consistency():
    t0 = time.perf_counter()
    ok = True
    rng = np.random.default_rng(9)
    eps = 1e-5
    for trial in range(20):
        inst = generate_instance(100 + trial, 10, 10, 200, 200)
        psi_bar, grad_bar = psi_and_grad(inst, inst.x_bar)
        ok &= abs(psi_bar) <= 1e-12 and np.linalg.norm(grad_bar) <= 1e-8
        for _ in range(100):
            x = rng.uniform(-5, 10, size=10)
            zs, vs = z_star(inst, x), v_star(inst, x)
            ok &= np.linalg.norm(inner_grad(inst, zs, x)) <= 1e-8
            grad_z_f = inst.C.T @ (inst.C @ zs - inst.D @ x - inst.b) / inst.n
            ok &= np.linalg.norm((inst.A.T @ inst.A / inst.m) @ vs + grad_z_f) <= 1e-8
            psi, grad = psi_and_grad(inst, x)
            fd = np.array([(psi_and_grad(inst, x + eps * e)[0]
                            - psi_and_grad(inst, x - eps * e)[0]) / (2 * eps)
                           for e in np.eye(10)])
            ok &= np.linalg.norm(grad - fd) / np.linalg.norm(grad) <= 1e-4
    elapsed = time.perf_counter() - t0
    report("analytic-oracle-consistency", ok and elapsed < 30,
           f"20 instances x 100 points, {elapsed:.1f}s")


def _convergence_config(algorithm, params):
    return ExperimentConfig(algorithm=algorithm, instance=INSTANCE,
                            params=params, budget=200_000,
                            master_seed=MASTER_SEED, repeats=SEEDS,
                            record_wall=False)


def test_scaled_convergence():
    t0 = time.perf_counter()
    configs = {
        "zoba": _convergence_config("zoba", dict(
            gamma=1e-3, rho=1e-3, h=1e-3, b1=1, b2=1, l1=10, l2=10)),
        "hfzoba": _convergence_config("hfzoba", dict(
            gamma=1e-3, rho=1e-2, h=1e-3, h_hat=1e-3, b1=1, b2=1, l1=10, l2=10)),
    }
    ok = True
    wins = {}
    for name, config in configs.items():
        traces = run_experiment(config)
        gaps = summarize(traces)["final_norm_gaps"]
        wins[name] = sum(1 for g in gaps if g <= 0.1)
        ok &= wins[name] >= 8
    elapsed = time.perf_counter() - t0
    report("scaled-convergence", ok and elapsed < 300,
           f"zoba {wins['zoba']}/10, hfzoba {wins['hfzoba']}/10, {elapsed:.0f}s")


def test_decaying_step_trend():
    decay = dict(kind="power-decay")
    configs = {
        "zoba": ExperimentConfig(
            algorithm="zoba", instance=INSTANCE, params=dict(
                gamma=dict(base=1e-2, exponent=0.6, **decay),
                rho=dict(base=1e-2, exponent=0.6, **decay),
                h=dict(base=1e-3, exponent=1.1, **decay),
                b1=1, b2=1, l1=10, l2=10),
            budget=50_000, master_seed=MASTER_SEED, repeats=SEEDS,
            record_wall=False),
        "hfzoba": ExperimentConfig(
            algorithm="hfzoba", instance=INSTANCE, params=dict(
                gamma=dict(base=1e-2, exponent=0.6, **decay),
                rho=dict(base=1e-2, exponent=0.6, **decay),
                h=dict(base=1e-3, exponent=0.6, **decay),
                h_hat=dict(base=1e-3, exponent=0.55, **decay),
                b1=1, b2=1, l1=10, l2=10),
            budget=50_000, master_seed=MASTER_SEED, repeats=SEEDS,
            record_wall=False),
    }
    ok = True
    wins = {}
    for name, config in configs.items():
        traces = run_experiment(config)
        wins[name] = 0
        for trace in traces:
            sq = np.array([row.grad_psi_norm ** 2 for row in trace.rows])
            q = len(sq) // 4
            if np.mean(sq[-q:]) < np.mean(sq[:q]):
                wins[name] += 1
        ok &= wins[name] >= 9
    report("decaying-step-trend", ok,
           f"zoba {wins['zoba']}/10, hfzoba {wins['hfzoba']}/10")


def test_parallel_update_and_determinism(tmp_path):
    inst = generate_instance(**INSTANCE)
    oracle = oracle_from_instance(inst)
    ok = True
    for step, make in ((zoba_step, lambda: ZobaParams(
            gamma=constant(1e-3), rho=constant(1e-3), h=constant(1e-3),
            l1=2, l2=2)),
                       (hfzoba_step, lambda: HfZobaParams(
            gamma=constant(1e-3), rho=constant(1e-3), h=constant(1e-3),
            h_hat=constant(1e-3), l1=2, l2=2))):
        outs = []
        for order in itertools.permutations(("z", "v", "x")):
            out = step(fresh_state(inst), oracle, make(), RngStreams(4),
                       update_order=order)
            outs.append((out.x, out.z, out.v))
        for x, z, v in outs[1:]:
            ok &= (np.array_equal(x, outs[0][0]) and np.array_equal(z, outs[0][1])
                   and np.array_equal(v, outs[0][2]))

    config = ExperimentConfig(algorithm="zoba", instance=INSTANCE,
                              params=dict(gamma=1e-3, rho=1e-3, h=1e-3,
                                          b1=1, b2=1, l1=2, l2=2),
                              budget=2000, master_seed=MASTER_SEED, repeats=2,
                              record_wall=False)
    csvs = []
    for tag in ("first", "second"):
        out = tmp_path / tag
        run_experiment(ExperimentConfig(**{**config.__dict__,
                                           "output_dir": str(out)}))
        csvs.append([(out / f"run_{r:02d}.csv").read_bytes() for r in range(2)])
    ok &= csvs[0] == csvs[1]
    report("parallel-update-and-determinism", ok)
