"""Selection probabilities and expected losses, exact and sampled.

The chance that the perturbed leader lands on expert i admits two
independent exact routes: an alternating sum over subsets of experts and a
one-dimensional integral over the location of the minimum.  Both are kept
so each can cross-check the other; Monte-Carlo sampling covers expert
counts where neither is practical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DOMAIN_ESTIMATE,
    DOMAIN_MC,
    ExpertClass,
    exponential_from_uniform,
    philox_generator,
)

__all__ = [
    "INCLUSION_EXCLUSION_MAX_N",
    "QUADRATURE_MAX_N",
    "WeightVector",
    "expected_step_loss",
    "selection_probabilities",
    "selection_probabilities_auto",
    "selection_probabilities_mc",
    "shifted_exp_max_estimate",
]

# 2^n subsets are enumerated exactly; beyond this the integral takes over.
INCLUSION_EXCLUSION_MAX_N = 20
QUADRATURE_MAX_N = 200

_QUAD_TAIL = 1e-14      # truncate where the integrand envelope exp(-eps*x) drops below this
_QUAD_RELTOL = 1e-8
_MC_BATCH = 1 << 17

_SUM_TOLERANCE = {
    "inclusion_exclusion": 1e-9,
    "quadrature": 1e-6,
    "monte_carlo": None,     # uses the stored error estimate
    "deterministic": 1e-12,
}


@dataclass(frozen=True)
class WeightVector:
    """Distribution of the perturbed leader's choice, with provenance.

    error_estimate is 0 for exact methods, the accumulated refinement error
    for quadrature, and 3/sqrt(samples) (total variation) for Monte Carlo.
    """

    weights: np.ndarray
    method: str
    error_estimate: float

    def __post_init__(self):
        w = self.weights
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if (w < -1e-12).any():
            raise RuntimeError(f"negative selection probability from {self.method}")
        tol = _SUM_TOLERANCE.get(self.method)
        if tol is None:
            tol = max(self.error_estimate, 1e-12)
        gap = abs(float(w.sum()) - 1.0)
        if gap > tol:
            raise RuntimeError(
                f"{self.method} weights sum to 1{gap:+.3e}, beyond tolerance {tol:g}"
            )

    @property
    def n(self) -> int:
        return int(self.weights.size)


def _validated_state(penalized_state, epsilon: float) -> np.ndarray:
    s = np.asarray(penalized_state, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("penalized state must be a non-empty 1-d sequence")
    if not np.isfinite(s).all():
        raise ValueError("penalized state must be finite")
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive and finite")
    return s


@lru_cache(maxsize=8)
def _mask_table(n: int):
    masks = np.arange(1, 1 << n, dtype=np.int64)
    sizes = np.zeros(masks.size, dtype=np.int64)
    for b in range(n):
        sizes[((masks >> b) & 1).astype(bool)] += 1
    return masks, sizes


def _weights_inclusion_exclusion(state: np.ndarray, epsilon: float):
    n = state.size
    if n == 1:
        return np.ones(1), 0.0
    gaps = state - state.min()
    masks, sizes = _mask_table(n)
    subset_gap = np.zeros(masks.size)
    for b in range(n):
        subset_gap[((masks >> b) & 1).astype(bool)] += gaps[b]
    signs = np.where(sizes & 1 == 1, 1.0, -1.0)
    terms = signs / sizes * np.exp(-epsilon * subset_gap)
    # Largest exponent argument first: the small-magnitude terms accumulate
    # before the alternating O(1) ones, limiting cancellation.
    order = np.argsort(-subset_gap, kind="stable")
    masks = masks[order]
    terms = terms[order]
    weights = np.empty(n)
    for i in range(n):
        sel = ((masks >> i) & 1).astype(bool)
        weights[i] = math.fsum(terms[sel])
    return np.clip(weights, 0.0, 1.0), 0.0


def _leave_one_out_products(g: np.ndarray) -> np.ndarray:
    n = g.size
    pre = np.ones(n)
    suf = np.ones(n)
    np.cumprod(g[:-1], out=pre[1:])
    suf[:-1] = np.cumprod(g[:0:-1])[::-1]
    return pre * suf


def _adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    flm = f(0.5 * (a + m))
    frm = f(0.5 * (m + b))
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = (left + right - whole) / 15.0
    if depth <= 0 or float(np.max(np.abs(err))) <= tol:
        return left + right + err, np.abs(err)
    lv, le = _adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
    rv, re = _adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    return lv + rv, le + re


def _weights_quadrature(state: np.ndarray, epsilon: float):
    n = state.size
    if n == 1:
        return np.ones(1), 0.0
    gaps = state - state.min()

    def integrand(x: float) -> np.ndarray:
        e = np.exp(-epsilon * (gaps + x))
        return epsilon * e * _leave_one_out_products(1.0 - e)

    x_max = -math.log(_QUAD_TAIL) / epsilon
    knots = sorted({c / epsilon for c in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)} | {x_max})
    knots = [x for x in knots if x <= x_max]
    total = np.zeros(n)
    err = np.zeros(n)
    seg_tol = _QUAD_RELTOL / max(1, len(knots) - 1)
    for a, b in zip(knots[:-1], knots[1:]):
        fa, fb = integrand(a), integrand(b)
        fm = integrand(0.5 * (a + b))
        whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        v, e = _adaptive_simpson(integrand, a, b, fa, fm, fb, whole, seg_tol, 48)
        total += v
        err += e
    return np.clip(total, 0.0, 1.0), float(err.max())


def selection_probabilities(penalized_state, epsilon: float,
                            method: str = "inclusion_exclusion") -> WeightVector:
    """Exact distribution of argmin_i {state_i - q_i/epsilon} over Exp(1) noise.

    ``penalized_state`` is the past cumulative loss plus complexity/epsilon.
    The subset enumeration is limited to n <= 20; pass method="quadrature"
    beyond that (or use selection_probabilities_mc).
    """
    s = _validated_state(penalized_state, epsilon)
    if method == "inclusion_exclusion":
        if s.size > INCLUSION_EXCLUSION_MAX_N:
            raise ValueError(
                f"inclusion_exclusion enumerates 2^n subsets and is unsupported for "
                f"n={s.size} > {INCLUSION_EXCLUSION_MAX_N}; use quadrature or monte carlo"
            )
        w, err = _weights_inclusion_exclusion(s, epsilon)
    elif method == "quadrature":
        w, err = _weights_quadrature(s, epsilon)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WeightVector(w, method, err)


def selection_probabilities_mc(penalized_state, epsilon: float, samples: int,
                               seed: int) -> WeightVector:
    """Empirical frequencies of the perturbed argmin over fresh Exp(1) draws."""
    s = _validated_state(penalized_state, epsilon)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = s.size
    err = 3.0 / math.sqrt(samples)
    if n == 1:
        return WeightVector(np.ones(1), "monte_carlo", err)
    counts = np.zeros(n, dtype=np.int64)
    done = 0
    batch_index = 0
    while done < samples:
        b = min(_MC_BATCH, samples - done)
        gen = philox_generator(seed, DOMAIN_MC + batch_index)
        q = exponential_from_uniform(gen.random((b, n)))
        counts += np.bincount(np.argmin(s - q / epsilon, axis=1), minlength=n)
        done += b
        batch_index += 1
    return WeightVector(counts / float(samples), "monte_carlo", err)


def selection_probabilities_auto(penalized_state, epsilon: float, *,
                                 mc_samples: int = 200_000, seed: int = 0) -> WeightVector:
    """Pick the cheapest adequate method for the given expert count."""
    s = np.asarray(penalized_state, dtype=float)
    if s.size <= INCLUSION_EXCLUSION_MAX_N:
        return selection_probabilities(s, epsilon, "inclusion_exclusion")
    if s.size <= QUADRATURE_MAX_N:
        return selection_probabilities(s, epsilon, "quadrature")
    return selection_probabilities_mc(s, epsilon, mc_samples, seed)


def expected_step_loss(weights, losses) -> float:
    """Inner product of a selection distribution with one step of losses."""
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    s = np.asarray(losses, dtype=float)
    if w.size != s.size:
        raise ValueError(f"length mismatch: {w.size} weights vs {s.size} losses")
    return float(w @ s)


def shifted_exp_max_estimate(experts: ExpertClass, samples: int,
                             seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of E[max_i (q_i - k_i)] for Exp(1) noise q.

    Returns (mean, standard error of the mean).  The mean is bounded above
    by 1 + ln(weight_sum) for any complexity vector.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000 for a usable standard error")
    k = experts.complexities
    total = 0.0
    total_sq = 0.0
    done = 0
    batch_index = 0
    while done < samples:
        b = min(_MC_BATCH, samples - done)
        gen = philox_generator(seed, DOMAIN_ESTIMATE + batch_index)
        q = exponential_from_uniform(gen.random((b, k.size)))
        m = (q - k).max(axis=1)
        total += float(m.sum())
        total_sq += float((m * m).sum())
        done += b
        batch_index += 1
    mean = total / samples
    var = max(0.0, (total_sq - samples * mean * mean) / (samples - 1))
    return mean, math.sqrt(var / samples)
