"""Learning-rate rules, one per regret theorem.

Each rule maps the run history to the rate for the upcoming step.  All of
them are provably non-increasing along any valid run, so the tracker treats
an increase as a bookkeeping bug and fails fast instead of clamping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CumulativeState, ExpertClass

__all__ = [
    "STATIC",
    "INV_SQRT_T",
    "SQRT_K_OVER_2T",
    "SELF_CONFIDENT",
    "SELF_CONFIDENT_ACTUAL",
    "ADAPTIVE_SMIN_GENERAL",
    "ADAPTIVE_SMIN_UNIFORM",
    "VARIANTS",
    "ScheduleSpec",
    "ScheduleHistory",
    "ScheduleTracker",
    "next_epsilon",
]

STATIC = "static"
INV_SQRT_T = "inv_sqrt_t"
SQRT_K_OVER_2T = "sqrt_K_over_2t"
SELF_CONFIDENT = "self_confident"
SELF_CONFIDENT_ACTUAL = "self_confident_actual"
ADAPTIVE_SMIN_GENERAL = "adaptive_smin_general"
ADAPTIVE_SMIN_UNIFORM = "adaptive_smin_uniform"

VARIANTS = (
    STATIC,
    INV_SQRT_T,
    SQRT_K_OVER_2T,
    SELF_CONFIDENT,
    SELF_CONFIDENT_ACTUAL,
    ADAPTIVE_SMIN_GENERAL,
    ADAPTIVE_SMIN_UNIFORM,
)

_K_VARIANTS = (SQRT_K_OVER_2T, SELF_CONFIDENT, SELF_CONFIDENT_ACTUAL, ADAPTIVE_SMIN_UNIFORM)
_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class ScheduleSpec:
    """A learning-rate rule plus its parameters.

    Rules carrying K require K to dominate every complexity in the paired
    expert class; that is a precondition of the matching theorems and is
    checked on every evaluation.
    """

    variant: str
    epsilon: float | None = None
    K: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown schedule variant {self.variant!r}")
        if self.variant == STATIC:
            if self.epsilon is None or not (self.epsilon > 0 and math.isfinite(self.epsilon)):
                raise ValueError("static schedule needs a positive finite epsilon")
        if self.variant in _K_VARIANTS:
            if self.K is None or not (self.K > 0 and math.isfinite(self.K)):
                raise ValueError(f"{self.variant} needs a positive finite K")

    @classmethod
    def static(cls, epsilon: float) -> "ScheduleSpec":
        return cls(STATIC, epsilon=float(epsilon))

    @classmethod
    def inv_sqrt_t(cls) -> "ScheduleSpec":
        return cls(INV_SQRT_T)

    @classmethod
    def sqrt_K_over_2t(cls, K: float) -> "ScheduleSpec":
        return cls(SQRT_K_OVER_2T, K=float(K))

    @classmethod
    def self_confident(cls, K: float = 1.0) -> "ScheduleSpec":
        return cls(SELF_CONFIDENT, K=float(K))

    @classmethod
    def self_confident_actual(cls, K: float = 1.0) -> "ScheduleSpec":
        return cls(SELF_CONFIDENT_ACTUAL, K=float(K))

    @classmethod
    def adaptive_smin_general(cls) -> "ScheduleSpec":
        return cls(ADAPTIVE_SMIN_GENERAL)

    @classmethod
    def adaptive_smin_uniform(cls, K: float) -> "ScheduleSpec":
        return cls(ADAPTIVE_SMIN_UNIFORM, K=float(K))

    @property
    def requires_expected_loss(self) -> bool:
        return self.variant == SELF_CONFIDENT

    @property
    def requires_actual_loss(self) -> bool:
        return self.variant == SELF_CONFIDENT_ACTUAL

    @property
    def carries_K(self) -> bool:
        return self.variant in _K_VARIANTS

    def label(self) -> str:
        if self.variant == STATIC:
            return f"static({self.epsilon:g})"
        if self.carries_K:
            return f"{self.variant}(K={self.K:g})"
        return self.variant


@dataclass(frozen=True)
class ScheduleHistory:
    """Prefix statistics available when choosing the rate for step t.

    expected_loss_prefix and actual_loss_prefix are the predictor's own
    cumulative expected / realized losses over steps < t; cumulative holds
    the environment's per-expert totals over steps < t.
    """

    t: int
    cumulative: CumulativeState
    expected_loss_prefix: float | None = None
    actual_loss_prefix: float | None = None


def next_epsilon(spec: ScheduleSpec, history: ScheduleHistory, experts: ExpertClass) -> float:
    """Rate for step history.t under the given rule.  Always positive."""
    t = history.t
    if t < 1:
        raise ValueError("step index must be >= 1")
    if spec.carries_K and spec.K + _MONOTONE_SLACK < float(experts.complexities.max()):
        raise ValueError(
            f"schedule K={spec.K:g} must dominate every complexity "
            f"(max is {float(experts.complexities.max()):g})"
        )
    v = spec.variant
    if v == STATIC:
        return float(spec.epsilon)
    if v == INV_SQRT_T:
        return 1.0 / math.sqrt(t)
    if v == SQRT_K_OVER_2T:
        return math.sqrt(spec.K / (2.0 * t))
    if v == SELF_CONFIDENT:
        ell = history.expected_loss_prefix
        if ell is None:
            raise RuntimeError(
                "self_confident schedule needs the expected-loss prefix; "
                "run with expected-loss tracking enabled"
            )
        return math.sqrt(spec.K / (2.0 * (ell + 1.0)))
    if v == SELF_CONFIDENT_ACTUAL:
        u = history.actual_loss_prefix
        if u is None:
            raise RuntimeError("self_confident_actual schedule needs the realized-loss prefix")
        return math.sqrt(spec.K / (2.0 * (u + 1.0)))
    if v == ADAPTIVE_SMIN_GENERAL:
        k = experts.complexities
        s = history.cumulative.sums
        return 1.0 / float(np.min(k + np.sqrt(k * k + 2.0 * s + 2.0)))
    if v == ADAPTIVE_SMIN_UNIFORM:
        smin = history.cumulative.min_loss
        if smin <= 0.0:
            return math.sqrt(0.5)  # the min{1, .} clamp is active
        return math.sqrt(0.5) * min(1.0, math.sqrt(spec.K / smin))
    raise AssertionError(f"unhandled variant {v}")


class ScheduleTracker:
    """Evaluates a schedule along one run and rejects any rate increase."""

    def __init__(self, spec: ScheduleSpec):
        self.spec = spec
        self._last = math.inf

    @property
    def last_epsilon(self) -> float:
        return self._last

    def next(self, history: ScheduleHistory, experts: ExpertClass) -> float:
        eps = next_epsilon(self.spec, history, experts)
        if eps > self._last + _MONOTONE_SLACK:
            raise RuntimeError(
                f"learning rate increased at t={history.t}: {self._last!r} -> {eps!r}; "
                "this indicates corrupted loss bookkeeping"
            )
        self._last = eps
        return eps
