"""Domain types and the perturbed-leader selection primitive.

Everything here is a pure function of its inputs, so values can be shared
freely across threads; sequential state lives in the predictors.

Randomness is counter-based (Philox).  A 128-bit key is formed from a
64-bit user seed and a 64-bit counter word, and distinct consumers of the
same seed occupy disjoint counter domains so their streams never collide:
per-step perturbations use the step index itself, Monte-Carlo weight
estimation uses ``DOMAIN_MC + batch``, loss generators use ``DOMAIN_ENV``,
and the perturbation-maximum estimator uses ``DOMAIN_ESTIMATE + batch``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "INITIAL_ONLY",
    "PER_STEP",
    "ExpertClass",
    "CumulativeState",
    "PerturbationSource",
    "as_loss_vector",
    "derive_seed",
    "exponential_from_uniform",
    "philox_generator",
    "sample_perturbation",
    "select_leader",
]

INITIAL_ONLY = "initial_only"
PER_STEP = "per_step"

DOMAIN_MC = 1 << 62
DOMAIN_ENV = 1 << 63
DOMAIN_ESTIMATE = (1 << 62) | (1 << 61)

_MASK64 = (1 << 64) - 1
_WEIGHT_SUM_SLACK = 1e-9


def philox_generator(seed: int, counter: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, counter); bit-reproducible."""
    key = ((int(seed) & _MASK64) << 64) | (int(counter) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, tag: int) -> int:
    """Derive an independent 64-bit stream seed from (seed, tag)."""
    ss = np.random.SeedSequence((int(seed), int(tag)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def exponential_from_uniform(u) -> np.ndarray:
    """Inverse-CDF transform: uniform draws in [0, 1) to Exp(1) variates."""
    return -np.log1p(-np.asarray(u, dtype=float))


def as_loss_vector(values, n: int | None = None) -> np.ndarray:
    """Validate one step of per-expert losses: finite values in [0, 1].

    Out-of-range losses are rejected rather than clamped; every regret
    guarantee assumes the [0, 1] normalization.
    """
    s = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("loss vector must be a non-empty 1-d sequence")
    if n is not None and s.size != n:
        raise ValueError(f"expected {n} losses, got {s.size}")
    if np.isnan(s).any():
        raise ValueError("loss vector contains NaN")
    if (s < 0.0).any() or (s > 1.0).any():
        raise ValueError("losses must lie in [0, 1]")
    return s


@dataclass(frozen=True)
class ExpertClass:
    """Finite expert universe with per-expert complexity penalties.

    ``weight_sum`` caches u = sum_i exp(-complexities[i]).  Strict classes
    (the default) must satisfy u <= 1, the normalization every regret
    theorem assumes; ``relaxed=True`` skips that check for estimators that
    only need u itself.
    """

    complexities: np.ndarray
    weight_sum: float
    relaxed: bool = False

    @classmethod
    def from_complexities(cls, complexities, relaxed: bool = False) -> "ExpertClass":
        k = np.array(complexities, dtype=float)
        if k.ndim != 1 or k.size == 0:
            raise ValueError("complexities must be a non-empty 1-d sequence")
        if not np.isfinite(k).all():
            raise ValueError("complexities must be finite")
        if (k < 0.0).any():
            raise ValueError("complexities must be non-negative")
        u = float(np.exp(-k).sum())
        if not relaxed and u > 1.0 + _WEIGHT_SUM_SLACK:
            raise ValueError(
                f"complexity weights exp(-k) sum to {u:.12g} > 1; "
                "increase the complexities or construct with relaxed=True"
            )
        return cls(k, u, relaxed)

    @classmethod
    def uniform(cls, n: int) -> "ExpertClass":
        """n experts sharing complexity ln(n)."""
        if n < 1:
            raise ValueError("need at least one expert")
        return cls.from_complexities(np.full(n, math.log(n)))

    @classmethod
    def log_series(cls, n: int) -> "ExpertClass":
        """First n experts of the countable class with complexity 2*ln(index+2).

        The weights 1/(index+2)^2 sum below 1 over the whole countable
        class, so any truncation is strict.
        """
        if n < 1:
            raise ValueError("need at least one expert")
        idx = np.arange(n, dtype=float)
        return cls.from_complexities(2.0 * np.log(idx + 2.0))

    @property
    def n(self) -> int:
        return int(self.complexities.size)

    def is_uniform(self, tol: float = 1e-12) -> bool:
        k = self.complexities
        return bool(k.max() - k.min() <= tol)


@dataclass(frozen=True)
class CumulativeState:
    """Running coordinatewise loss totals.

    Accumulation is compensated (Kahan), so after T steps the sums match a
    full recomputation to ~1e-12 per step.  ``compensation`` carries the
    low-order bits between updates.
    """

    sums: np.ndarray
    step: int
    compensation: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "CumulativeState":
        if n < 1:
            raise ValueError("need at least one expert")
        return cls(np.zeros(n), 0, np.zeros(n))

    def add(self, losses) -> "CumulativeState":
        s = as_loss_vector(losses, self.sums.size)
        y = s - self.compensation
        t = self.sums + y
        comp = (t - self.sums) - y
        return CumulativeState(t, self.step + 1, comp)

    @property
    def n(self) -> int:
        return int(self.sums.size)

    @property
    def min_loss(self) -> float:
        return float(self.sums.min())


@dataclass(frozen=True)
class PerturbationSource:
    """Seeded exponential noise, drawn once (initial_only) or fresh per step."""

    seed: int
    mode: str = PER_STEP

    def __post_init__(self):
        if self.mode not in (INITIAL_ONLY, PER_STEP):
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


def sample_perturbation(source: PerturbationSource, n: int, t: int) -> np.ndarray:
    """Perturbation vector for step t.

    initial_only ignores t and reproduces the identical vector at every
    step; per_step draws are independent across steps and reproducible
    from (seed, t).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 1:
        raise ValueError("step index must be >= 1")
    counter = 0 if source.mode == INITIAL_ONLY else int(t)
    gen = philox_generator(source.seed, counter)
    return exponential_from_uniform(gen.random(n))


def select_leader(state, experts, perturbation, epsilon: float) -> int:
    """Expert index minimizing state + (k - q)/epsilon; ties go to the lowest index.

    epsilon may be +inf, which zeroes both penalty and perturbation so the
    call reduces to plain follow-the-leader on ``state`` (pass state + k
    for the penalized variant).
    """
    sums = state.sums if isinstance(state, CumulativeState) else np.asarray(state, dtype=float)
    k = experts.complexities if isinstance(experts, ExpertClass) else np.asarray(experts, dtype=float)
    q = np.asarray(perturbation, dtype=float)
    if sums.size == 0:
        raise ValueError("empty expert class")
    if not (sums.size == k.size == q.size):
        raise ValueError(
            f"length mismatch: state {sums.size}, complexities {k.size}, perturbation {q.size}"
        )
    if np.isnan(sums).any() or np.isnan(k).any() or np.isnan(q).any():
        raise ValueError("NaN in select_leader input")
    if not epsilon > 0:  # also rejects NaN
        raise ValueError("epsilon must be positive (or +inf)")
    if math.isinf(epsilon):
        scores = sums
    else:
        scores = sums + (k - q) / epsilon
    return int(np.argmin(scores))
