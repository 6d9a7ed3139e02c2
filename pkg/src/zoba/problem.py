"""Black-box bilevel problem abstractions shared by both solvers.

A bilevel problem is described only through noisy scalar evaluations of the
inner objective g(z, x, xi) and the outer objective f(z, x, zeta).  Solvers
never see gradients; everything downstream is built from these two calls.
"""

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid user-supplied configuration (bad schedule, dims, ...)."""


# Named sub-streams derived from one master seed.  Each stream gets its own
# generator so that, e.g., changing how many noise tokens are drawn never
# shifts the direction samples.
_STREAM_IDS = {
    "init": 0,
    "directions-w": 1,
    "directions-u": 2,
    "noise-xi": 3,
    "noise-zeta": 4,
}


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Deterministic named sub-stream of a master seed."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}")
    seq = np.random.SeedSequence(master_seed, spawn_key=(_STREAM_IDS[name],))
    return np.random.default_rng(seq)


class RngStreams:
    """The five per-run generators, created once and consumed sequentially."""

    def __init__(self, master_seed: int):
        self.master_seed = master_seed
        self.init = substream(master_seed, "init")
        self.directions_w = substream(master_seed, "directions-w")
        self.directions_u = substream(master_seed, "directions-u")
        self.noise_xi = substream(master_seed, "noise-xi")
        self.noise_zeta = substream(master_seed, "noise-zeta")


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard-normal draws via Box-Muller on uniform variates.

    A fixed, explicit transform (rather than the generator's native normal
    method) so traces are reproducible across library versions given the
    same seed.
    """
    n = int(np.prod(shape))
    if n == 0:
        return np.zeros(shape)
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
    return out.reshape(shape)


@dataclass
class BilevelOracle:
    """Stochastic zeroth-order access to a bilevel problem.

    eval_g / eval_f must be deterministic in (z, x, token): re-evaluating with
    the same arguments returns the same scalar.  Noise tokens are opaque
    handles produced by the oracle's own samplers; solvers never inspect them.
    """

    inner_dim: int
    outer_dim: int
    eval_g: Callable[[np.ndarray, np.ndarray, Any], float]
    eval_f: Callable[[np.ndarray, np.ndarray, Any], float]
    sample_inner_noise: Callable[[np.random.Generator], Any]
    sample_outer_noise: Callable[[np.random.Generator], Any]

    def __post_init__(self):
        if self.inner_dim < 1 or self.outer_dim < 1:
            raise ConfigError("oracle dimensions must be positive")


@dataclass
class EvalLedger:
    """Monotone counters of oracle calls, with per-iteration deltas."""

    count_g: int = 0
    count_f: int = 0
    per_iteration_last: int = 0
    _iteration_mark: int = field(default=0, repr=False)

    def record(self, which: str, n: int = 1) -> None:
        if n < 1:
            raise ValueError("n must be >= 1")
        if which == "g":
            self.count_g += n
        elif which == "f":
            self.count_f += n
        else:
            raise ValueError(f"unknown counter {which!r}")

    def total(self) -> int:
        return self.count_g + self.count_f

    def end_iteration(self) -> int:
        """Close an iteration boundary and return the fresh-evaluation delta."""
        self.per_iteration_last = self.total() - self._iteration_mark
        self._iteration_mark = self.total()
        return self.per_iteration_last


@dataclass(frozen=True)
class StepSchedule:
    """Constant or power-decay scalar sequence, value(k) for k >= 0."""

    kind: str  # "constant" | "power-decay"
    base: float
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "power-decay"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.base > 0:
            raise ConfigError("schedule base must be positive")

    def value(self, k: int) -> float:
        if k < 0:
            raise ValueError("iteration index must be non-negative")
        if self.kind == "constant":
            return self.base
        return self.base * float(k + 1) ** (-self.exponent)


def schedule_value(schedule: StepSchedule, k: int) -> float:
    return schedule.value(k)


def constant(base: float) -> StepSchedule:
    return StepSchedule("constant", base)


def power_decay(base: float, exponent: float) -> StepSchedule:
    return StepSchedule("power-decay", base, exponent)
