"""Synthetic quadratic bilevel benchmark with analytic oracles.

The inner objective is a least-squares fit G(z, x) = ||A z - B x - a||^2 / 2m
and the outer objective is F(z, x) = ||C z - D x - b||^2 / 2n
+ ||x - x_bar||^2 / 2, with a and b chosen so that (z_bar, x_bar) zeroes both
residuals.  Consequently the value function attains its minimum 0 at x_bar,
and z*, v*, Psi and its gradient are all available in closed form for
verification and metrics.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problem import BilevelOracle, ConfigError, standard_normal


@dataclass
class QuadraticInstance:
    A: np.ndarray  # (m, p)
    B: np.ndarray  # (m, d)
    C: np.ndarray  # (n, p)
    D: np.ndarray  # (n, d)
    a: np.ndarray  # (m,)
    b: np.ndarray  # (n,)
    z_bar: np.ndarray
    x_bar: np.ndarray
    seed: int | None = None
    _ata_chol: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self._ata_chol is None:
            self._ata_chol = cho_factor(self.A.T @ self.A)

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def solve_ata(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self._ata_chol, rhs)

    def to_json(self) -> str:
        """Dims, seed and anchor points; matrices are regenerable from the seed."""
        doc = {"p": self.p, "d": self.d, "n": self.n, "m": self.m,
               "seed": self.seed,
               "z_bar": self.z_bar.tolist(), "x_bar": self.x_bar.tolist()}
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "QuadraticInstance":
        doc = json.loads(text)
        return generate_instance(doc["seed"], doc["p"], doc["d"], doc["n"], doc["m"],
                                 z_bar=np.asarray(doc["z_bar"], dtype=float),
                                 x_bar=np.asarray(doc["x_bar"], dtype=float))


def generate_instance(seed: int, p: int, d: int, n: int, m: int,
                      z_bar=None, x_bar=None, _attempt: int = 0) -> QuadraticInstance:
    """Sample a benchmark instance with i.i.d. standard-normal matrix entries.

    Requires m >= p so the inner normal matrix is invertible almost surely;
    on a (numerically) singular draw the instance is regenerated from a
    derived sub-seed, at most 5 times.
    """
    if m < p:
        raise ConfigError("need m >= p for an invertible inner normal matrix")
    if n < 1 or m < 1:
        raise ConfigError("n and m must be >= 1")
    z_bar = np.full(p, 2.0) if z_bar is None else np.asarray(z_bar, dtype=float)
    x_bar = np.full(d, 1.0) if x_bar is None else np.asarray(x_bar, dtype=float)

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_attempt,)))
    A = standard_normal(rng, (m, p))
    B = standard_normal(rng, (m, d))
    C = standard_normal(rng, (n, p))
    D = standard_normal(rng, (n, d))
    a = A @ z_bar - B @ x_bar
    b = C @ z_bar - D @ x_bar

    ata = A.T @ A
    if np.linalg.cond(ata) > 1e12:
        if _attempt >= 5:
            raise ConfigError("could not generate a well-conditioned instance")
        return generate_instance(seed, p, d, n, m, z_bar, x_bar, _attempt + 1)
    return QuadraticInstance(A=A, B=B, C=C, D=D, a=a, b=b,
                             z_bar=z_bar, x_bar=x_bar, seed=seed)


def oracle_from_instance(inst: QuadraticInstance) -> BilevelOracle:
    """Stochastic zeroth-order view of an instance.

    Noise tokens are uniform row indices drawn with replacement; averaging
    g over all rows recovers G and likewise for f and F.
    """
    def eval_g(z, x, j):
        r = inst.A[j] @ z - inst.B[j] @ x - inst.a[j]
        return 0.5 * r * r

    def eval_f(z, x, i):
        r = inst.C[i] @ z - inst.D[i] @ x - inst.b[i]
        dx = x - inst.x_bar
        return 0.5 * r * r + 0.5 * float(dx @ dx)

    return BilevelOracle(
        inner_dim=inst.p, outer_dim=inst.d,
        eval_g=eval_g, eval_f=eval_f,
        sample_inner_noise=lambda rng: int(rng.integers(inst.m)),
        sample_outer_noise=lambda rng: int(rng.integers(inst.n)),
    )


# -- analytic oracles (never charged to the evaluation ledger) --

def inner_grad(inst: QuadraticInstance, z, x) -> np.ndarray:
    """Gradient of the averaged inner objective G in z."""
    return inst.A.T @ (inst.A @ z - inst.B @ x - inst.a) / inst.m


def z_star(inst: QuadraticInstance, x) -> np.ndarray:
    """Exact inner minimizer (A^T A)^-1 A^T (B x + a)."""
    return inst.solve_ata(inst.A.T @ (inst.B @ x + inst.a))


def v_star(inst: QuadraticInstance, x) -> np.ndarray:
    """Exact adjoint vector -(A^T A / m)^-1 * grad_z F(z*(x), x)."""
    zs = z_star(inst, x)
    grad_z_f = inst.C.T @ (inst.C @ zs - inst.D @ x - inst.b) / inst.n
    return -inst.m * inst.solve_ata(grad_z_f)


def psi_and_grad(inst: QuadraticInstance, x):
    """Value function Psi(x) and its exact hypergradient."""
    zs = z_star(inst, x)
    r = inst.C @ zs - inst.D @ x - inst.b
    dx = x - inst.x_bar
    psi = 0.5 * float(r @ r) / inst.n + 0.5 * float(dx @ dx)
    grad_x_f = -inst.D.T @ r / inst.n + dx
    vs = -inst.m * inst.solve_ata(inst.C.T @ r / inst.n)
    hess_xz = -inst.B.T @ inst.A / inst.m
    return psi, grad_x_f + hess_xz @ vs
