"""Finite-difference gradient, Hessian-block and Hessian-vector surrogates.

All estimators of one iteration read from a shared :class:`EstimatorBatch`
that owns the direction pool, the noise tokens and a cache of function
values keyed by symbolic point tags.  The cache is what realizes the
evaluation reuse of the single-loop scheme: each (point, noise) pair is
charged to the ledger exactly once per iteration, and the per-iteration
fresh-evaluation counts come out to

    ZOBA:     b1 * (4*l1 + 1) + b2 * (2*l2 + 1)
    HF-ZOBA:  2*b1 * (2*l1 + 1) + b2 * (2*l2 + 1)

Reductions over (sample index i, direction index j) always run in that
fixed order, so results do not depend on evaluation scheduling.
"""

from dataclasses import dataclass

import numpy as np

from .problem import BilevelOracle, ConfigError, EvalLedger, standard_normal


class EstimatorCacheError(RuntimeError):
    """A stencil point that the reuse contract requires was never evaluated."""


@dataclass
class DirectionPool:
    """Shared Gaussian directions for one iteration.

    w has shape (b, l, p) and u has shape (b, l, d) with b = max(b1, b2) and
    l = max(l1, l2); every estimator consumes a prefix of the pool.
    """

    w: np.ndarray
    u: np.ndarray

    @property
    def b(self) -> int:
        return self.w.shape[0]

    @property
    def l(self) -> int:
        return self.w.shape[1]


def sample_direction_pool(rng_w, rng_u, b: int, l: int, p: int, d: int) -> DirectionPool:
    """Draw the iteration's i.i.d. standard-normal direction rows."""
    w = standard_normal(rng_w, (b, l, p))
    u = standard_normal(rng_u, (b, l, d))
    return DirectionPool(w=w, u=u)


# evaluator name -> (objective, shifted variable)
_FORWARD_VARIANTS = {
    "g-in-z": ("g", "z"),
    "g-in-x": ("g", "x"),
    "f-in-z": ("f", "z"),
    "f-in-x": ("f", "x"),
}


class EstimatorBatch:
    """One iteration's evaluations of g and f around a base point (z, x).

    Caching is keyed by (symbolic tag, sample index, direction index) rather
    than by floating-point coordinates, so reuse is exact by construction.
    """

    def __init__(self, oracle: BilevelOracle, ledger: EvalLedger,
                 z: np.ndarray, x: np.ndarray, h: float,
                 pool: DirectionPool, inner_noise, outer_noise):
        if not h > 0:
            raise ConfigError("discretization parameter h must be positive")
        self.oracle = oracle
        self.ledger = ledger
        self.z = z
        self.x = x
        self.h = h
        self.pool = pool
        self.inner_noise = inner_noise
        self.outer_noise = outer_noise
        self._cache: dict = {}

    def _eval_g(self, key, z, x, i) -> float:
        if key not in self._cache:
            self._cache[key] = self.oracle.eval_g(z, x, self.inner_noise[i])
            self.ledger.record("g")
        return self._cache[key]

    def _eval_f(self, key, z, x, i) -> float:
        if key not in self._cache:
            self._cache[key] = self.oracle.eval_f(z, x, self.outer_noise[i])
            self.ledger.record("f")
        return self._cache[key]

    def _check_prefix(self, b: int, l: int) -> None:
        if b > self.pool.b or l > self.pool.l:
            raise ConfigError("requested prefix exceeds the direction pool")
        if b < 1 or l < 1:
            raise ConfigError("batch sizes and direction counts must be >= 1")

    # -- inner-gradient central difference (the z-update search direction) --

    def grad_central_inner(self, b1: int, l1: int) -> np.ndarray:
        """Minibatch central-difference estimate of the inner gradient in z.

        Charges 2*b1*l1 fresh g evaluations; the +/- values stay cached for
        the zz-Hessian surrogate of the same iteration.
        """
        self._check_prefix(b1, l1)
        h = self.h
        acc = np.zeros(self.oracle.inner_dim)
        for i in range(b1):
            W = self.pool.w[i, :l1]
            coeffs = np.empty(l1)
            for j in range(l1):
                gp = self._eval_g(("g+", i, j), self.z + h * W[j], self.x, i)
                gm = self._eval_g(("g-", i, j), self.z - h * W[j], self.x, i)
                coeffs[j] = (gp - gm) / (2.0 * h)
            acc += coeffs @ W
        return acc / (b1 * l1)

    # -- forward-difference gradients of f (both blocks) and g (HF variant) --

    def grad_forward(self, evaluator: str, b: int, l: int,
                     base=None, tag: str = "base") -> np.ndarray:
        """Minibatch forward-difference gradient estimate.

        evaluator selects the objective and the shifted block; in-z variants
        use the w rows, in-x variants the u rows.  ``base`` overrides the
        batch base point (used by the Hessian-free solver at z + hbar*v);
        distinct base points must carry distinct tags.
        """
        if evaluator not in _FORWARD_VARIANTS:
            raise ConfigError(f"unknown evaluator {evaluator!r}")
        self._check_prefix(b, l)
        objective, block = _FORWARD_VARIANTS[evaluator]
        z0, x0 = (self.z, self.x) if base is None else base
        h = self.h
        evaluate = self._eval_g if objective == "g" else self._eval_f
        rows = self.pool.w if block == "z" else self.pool.u
        dim = self.oracle.inner_dim if block == "z" else self.oracle.outer_dim

        acc = np.zeros(dim)
        for i in range(b):
            base_val = evaluate((objective + "0", tag, i), z0, x0, i)
            R = rows[i, :l]
            coeffs = np.empty(l)
            for j in range(l):
                if block == "z":
                    shifted = evaluate((evaluator, tag, i, j), z0 + h * R[j], x0, i)
                else:
                    shifted = evaluate((evaluator, tag, i, j), z0, x0 + h * R[j], i)
                coeffs[j] = (shifted - base_val) / h
            acc += coeffs @ R
        return acc / (b * l)

    # -- Hessian-block surrogates (ZOBA only) --

    def hess_zz_estimate(self, b1: int, l1: int) -> np.ndarray:
        """Second-difference surrogate of the inner zz-Hessian block.

        Reuses the cached +/- values of :meth:`grad_central_inner`; only the
        b1 base values are fresh.  A missing +/- point is a programming
        error, not a recoverable condition.
        """
        self._check_prefix(b1, l1)
        p = self.oracle.inner_dim
        h = self.h
        acc = np.zeros((p, p))
        for i in range(b1):
            g0 = self._eval_g(("g0", "base", i), self.z, self.x, i)
            W = self.pool.w[i, :l1]
            c = np.empty(l1)
            for j in range(l1):
                if ("g+", i, j) not in self._cache or ("g-", i, j) not in self._cache:
                    raise EstimatorCacheError(
                        "hess_zz_estimate requires the central-difference points "
                        "of grad_central_inner to be cached")
                c[j] = (self._cache[("g+", i, j)] + self._cache[("g-", i, j)]
                        - 2.0 * g0) / (2.0 * h * h)
            acc += W.T @ (c[:, None] * W) - c.sum() * np.eye(p)
        return acc / (b1 * l1)

    def hess_xz_estimate(self, b1: int, l1: int) -> np.ndarray:
        """Second-difference surrogate of the cross xz-Hessian block (d x p).

        Performs exactly 2*b1*l1 fresh evaluations at the jointly shifted
        points (z +/- h*w, x +/- h*u); base values must already be cached.
        """
        self._check_prefix(b1, l1)
        d, p = self.oracle.outer_dim, self.oracle.inner_dim
        h = self.h
        acc = np.zeros((d, p))
        for i in range(b1):
            if ("g0", "base", i) not in self._cache:
                raise EstimatorCacheError(
                    "hess_xz_estimate requires the base values of "
                    "hess_zz_estimate to be cached")
            g0 = self._cache[("g0", "base", i)]
            W = self.pool.w[i, :l1]
            U = self.pool.u[i, :l1]
            s = np.empty(l1)
            for j in range(l1):
                gp = self._eval_g(("gx+", i, j), self.z + h * W[j], self.x + h * U[j], i)
                gm = self._eval_g(("gx-", i, j), self.z - h * W[j], self.x - h * U[j], i)
                s[j] = (gp + gm - 2.0 * g0) / (2.0 * h * h)
            acc += U.T @ (s[:, None] * W)
        return acc / (b1 * l1)


def hvp_forward(grad_map, z: np.ndarray, x: np.ndarray, v: np.ndarray,
                hbar: float) -> np.ndarray:
    """First-order finite-difference Hessian-vector product.

    grad_map(z, x) -> vector; the shift is applied in z.  When grad_map is an
    exact gradient of a function with L2-Lipschitz Hessian, the error is at
    most (L2/2) * hbar * ||v||^2 (zero for quadratics).
    """
    if not hbar > 0:
        raise ConfigError("hbar must be positive")
    return (grad_map(z + hbar * v, x) - grad_map(z, x)) / hbar
