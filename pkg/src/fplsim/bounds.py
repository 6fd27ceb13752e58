"""Closed-form regret-bound values, probability envelopes, and run verdicts.

``bound_value`` evaluates a single theorem's right-hand side from scalars;
``verify`` matches a list of requests against a completed run, resolving
per-expert parameters and reporting inapplicable pairings (wrong schedule,
missing measurement) as verdict states rather than errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "THEOREM_IDS",
    "BoundRequest",
    "BoundVerdict",
    "Envelope",
    "bound_value",
    "high_probability_envelope",
    "verify",
]

THEOREM_IDS = (
    "static_i",
    "static_ii",
    "static_iii",
    "dynamic_i",
    "dynamic_ii",
    "selfconf_i",
    "selfconf_ii",
    "adaptive_i",
    "adaptive_ii",
    "hierarchy_a",
    "ifpl_corollary",
    "lower_uniform",
)

# Theorems whose right-hand side is indexed by a comparator expert; the
# verdict sweeps all experts and keeps the tightest value.
_PER_EXPERT = frozenset({
    "static_i", "static_ii", "dynamic_i", "dynamic_ii",
    "selfconf_i", "selfconf_ii", "adaptive_i", "hierarchy_a", "ifpl_corollary",
})

_EXACT_MARGIN = 1e-9
_REL_TOL = 1e-6


@dataclass(frozen=True)
class BoundRequest:
    """One theorem to evaluate, plus whichever scalars it needs.

    expert_index selects the comparator expert when verifying against a
    run; leaving it (and the explicit scalars) unset makes the verdict
    sweep every expert and keep the tightest right-hand side.
    """

    theorem_id: str
    L: float | None = None
    K: float | None = None
    horizon: int | None = None
    n: int | None = None
    expert_index: int | None = None
    expert_complexity: float | None = None
    expert_loss: float | None = None
    min_loss: float | None = None
    final_epsilon: float | None = None

    def __post_init__(self):
        if self.theorem_id not in THEOREM_IDS:
            raise ValueError(f"unknown theorem id {self.theorem_id!r}")


def _need(request: BoundRequest, *names: str) -> list[float]:
    values = []
    for name in names:
        v = getattr(request, name)
        if v is None:
            raise ValueError(f"{request.theorem_id} needs parameter {name!r}")
        values.append(v)
    return values


def bound_value(request: BoundRequest) -> float:
    """Right-hand side of the requested bound, exactly as displayed.

    adaptive_ii involves ln(min_loss), which is negative or undefined for
    min_loss <= 1; the logarithm argument is floored at 1 there (callers
    should flag that regime, see ``adaptive_ii_log_floored``).
    """
    tid = request.theorem_id
    if tid == "static_i":
        s, L, k = _need(request, "expert_loss", "L", "expert_complexity")
        return s + math.sqrt(L) * (k + 1.0)
    if tid == "static_ii":
        s, L, K = _need(request, "expert_loss", "L", "K")
        return s + 2.0 * math.sqrt(L * K)
    if tid == "static_iii":
        s, L, k = _need(request, "expert_loss", "L", "expert_complexity")
        return s + 2.0 * math.sqrt(L * k) + 3.0 * k
    if tid == "dynamic_i":
        s, T, k = _need(request, "expert_loss", "horizon", "expert_complexity")
        return s + math.sqrt(T) * (k + 2.0)
    if tid == "dynamic_ii":
        s, T, K = _need(request, "expert_loss", "horizon", "K")
        return s + 2.0 * math.sqrt(2.0 * T * K)
    if tid == "selfconf_i":
        s, k = _need(request, "expert_loss", "expert_complexity")
        return s + (k + 1.0) * math.sqrt(2.0 * (s + 1.0)) + 2.0 * (k + 1.0) ** 2
    if tid == "selfconf_ii":
        s, K = _need(request, "expert_loss", "K")
        return s + 2.0 * math.sqrt(2.0 * (s + 1.0) * K) + 8.0 * K
    if tid == "adaptive_i":
        s, k = _need(request, "expert_loss", "expert_complexity")
        return s + (k + 2.0) * math.sqrt(2.0 * s) + 2.0 * (k + 2.0) ** 2
    if tid == "adaptive_ii":
        smin, K = _need(request, "min_loss", "K")
        return (smin + 2.0 * math.sqrt(2.0 * K * smin)
                + 5.0 * K * math.log(max(smin, 1.0)) + 3.0 * K + 6.0)
    if tid == "hierarchy_a":
        s, T, k = _need(request, "expert_loss", "horizon", "expert_complexity")
        bracket = 2.0 * math.sqrt(2.0 * (k + 1.0)) + 0.5 + 2.0 * math.log(k + 1.0) + 2.0
        return s + math.sqrt(T) * bracket
    if tid == "ifpl_corollary":
        s, k, eps = _need(request, "expert_loss", "expert_complexity", "final_epsilon")
        return s + k / eps
    if tid == "lower_uniform":
        smin, n, eps = _need(request, "min_loss", "n", "final_epsilon")
        return smin - math.log(n) / eps
    raise AssertionError(f"unhandled theorem id {tid}")


def adaptive_ii_log_floored(request: BoundRequest) -> bool:
    """True when adaptive_ii's logarithm was floored (min_loss <= 1)."""
    return request.theorem_id == "adaptive_ii" and request.min_loss is not None \
        and request.min_loss <= 1.0


@dataclass(frozen=True)
class Envelope:
    """Markov and Chernoff-Hoeffding concentration thresholds for one run.

    The Chernoff thresholds assume fresh perturbations every step; the
    halfwidth is only meaningful once expected >= 3c (``chernoff_valid``).
    """

    markov_threshold: float
    markov_mass: float
    chernoff_halfwidth: float
    chernoff_mass: float
    chernoff_valid: bool


def high_probability_envelope(expected: float, c: float) -> Envelope:
    if not c > 0:
        raise ValueError("c must be positive")
    if expected < 0:
        raise ValueError("expected loss must be non-negative")
    return Envelope(
        markov_threshold=c * expected,
        markov_mass=min(1.0, 1.0 / c),
        chernoff_halfwidth=math.sqrt(3.0 * c * expected),
        chernoff_mass=2.0 * math.exp(-c),
        chernoff_valid=expected >= 3.0 * c,
    )


@dataclass(frozen=True)
class BoundVerdict:
    """Outcome of checking one bound against a measured run."""

    theorem_id: str
    bound_value: float | None
    measured: float | None
    slack: float | None
    margin: float
    holds: bool
    applicable: bool
    direction: str = "upper"
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "bound_value": self.bound_value,
            "measured": self.measured,
            "slack": self.slack,
            "margin": self.margin,
            "holds": self.holds,
            "applicable": self.applicable,
            "direction": self.direction,
            "note": self.note,
        }


def _inapplicable(tid: str, note: str) -> BoundVerdict:
    return BoundVerdict(tid, None, None, None, 0.0, False, False, note=note)


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=1e-12)


def _static_relation(run, req: BoundRequest):
    """Resolve L for the static theorems and check epsilon = f(L) holds."""
    eps = run.schedule.epsilon
    tid = req.theorem_id
    if tid == "static_i":
        L = req.L if req.L is not None else 1.0 / eps**2
        ok = _close(eps, 1.0 / math.sqrt(L))
    elif tid == "static_ii":
        if req.K is None:
            return None, "static_ii needs K"
        L = req.L if req.L is not None else req.K / eps**2
        ok = _close(eps, math.sqrt(req.K / L))
    else:  # static_iii, comparator expert fixed
        if req.expert_complexity is None:
            return None, "static_iii needs a fixed comparator expert (expert_index)"
        L = req.L if req.L is not None else req.expert_complexity / eps**2
        ok = _close(eps, math.sqrt(req.expert_complexity / L)) if L > 0 else False
    if not ok:
        return None, f"static epsilon {eps:g} does not match the theorem's rule for L={L:g}"
    return L, ""


def _resolve_expert(run, req: BoundRequest) -> BoundRequest:
    if req.expert_index is not None and req.expert_complexity is None:
        i = req.expert_index
        req = replace(req, expert_complexity=float(run.complexities[i]),
                      expert_loss=float(run.per_expert_loss[i]))
    return req


def _measured_for(run, tid: str):
    if tid == "ifpl_corollary":
        if run.r_total is None:
            return None, 0.0, "needs a paired hindsight trace (algorithm ifpl_paired)"
        return run.r_total, run.r_margin, ""
    if tid == "hierarchy_a":
        if run.ell_total is not None:
            return run.ell_total, run.ell_margin, ""
        return run.u_total, 0.0, "realized loss of a single run; the bound holds in expectation"
    if run.ell_total is None:
        return None, 0.0, "needs an expected-loss measurement (exact or mc)"
    return run.ell_total, run.ell_margin, ""


def _check_applicable(run, req: BoundRequest):
    """Returns (resolved request, note) or (None, reason)."""
    tid = req.theorem_id
    sched = run.schedule
    if tid == "hierarchy_a":
        if run.algorithm != "hierarchy":
            return None, "hierarchy_a applies to hierarchical runs only"
        return replace(req, horizon=req.horizon or run.horizon), ""
    if tid == "ifpl_corollary":
        return replace(req, final_epsilon=req.final_epsilon or run.final_epsilon), ""
    if tid == "lower_uniform":
        k = run.complexities
        if float(k.max() - k.min()) > 1e-12:
            return None, "lower_uniform requires uniform complexities"
        return replace(req, n=req.n or run.n, min_loss=run.min_loss,
                       final_epsilon=req.final_epsilon or run.final_epsilon), ""
    if sched is None:
        return None, f"{tid} needs a learning-rate schedule; run has none"
    if tid in ("static_i", "static_ii", "static_iii"):
        if sched.variant != "static":
            return None, f"{tid} applies to static schedules, run used {sched.label()}"
        req = _resolve_expert(run, req)
        L, err = _static_relation(run, req)
        if L is None:
            return None, err
        return replace(req, L=L), ""
    if tid == "dynamic_i":
        if sched.variant != "inv_sqrt_t":
            return None, f"dynamic_i applies to the 1/sqrt(t) schedule, run used {sched.label()}"
        return replace(req, horizon=req.horizon or run.horizon), ""
    if tid == "dynamic_ii":
        if sched.variant != "sqrt_K_over_2t":
            return None, f"dynamic_ii applies to the sqrt(K/2t) schedule, run used {sched.label()}"
        if req.K is not None and not _close(req.K, sched.K):
            return None, f"request K={req.K:g} differs from schedule K={sched.K:g}"
        return replace(req, K=sched.K, horizon=req.horizon or run.horizon), ""
    if tid == "selfconf_i":
        if sched.variant != "self_confident" or not _close(sched.K, 1.0):
            return None, "selfconf_i applies to the self-confident schedule with K=1"
        return req, ""
    if tid == "selfconf_ii":
        if sched.variant != "self_confident":
            return None, f"selfconf_ii applies to self-confident schedules, run used {sched.label()}"
        if req.K is not None and not _close(req.K, sched.K):
            return None, f"request K={req.K:g} differs from schedule K={sched.K:g}"
        return replace(req, K=sched.K), ""
    if tid == "adaptive_i":
        if sched.variant != "adaptive_smin_general":
            return None, f"adaptive_i applies to adaptive_smin_general, run used {sched.label()}"
        return req, ""
    if tid == "adaptive_ii":
        if sched.variant != "adaptive_smin_uniform":
            return None, f"adaptive_ii applies to adaptive_smin_uniform, run used {sched.label()}"
        if req.K is not None and not _close(req.K, sched.K):
            return None, f"request K={req.K:g} differs from schedule K={sched.K:g}"
        return replace(req, K=sched.K, min_loss=run.min_loss), ""
    raise AssertionError(f"unhandled theorem id {tid}")


def _tightest_bound(run, req: BoundRequest):
    """Evaluate the RHS, sweeping comparator experts where the theorem allows."""
    tid = req.theorem_id
    if tid in _PER_EXPERT and req.expert_complexity is None:
        k = run.complexities
        s = run.per_expert_loss
        best = math.inf
        best_i = -1
        for i in range(run.n):
            v = bound_value(replace(req, expert_complexity=float(k[i]),
                                    expert_loss=float(s[i])))
            if v < best:
                best, best_i = v, i
        return best, f"tightest over experts at index {best_i}"
    if tid in _PER_EXPERT and req.expert_loss is None:
        raise ValueError(f"{tid}: expert_complexity given without expert_loss")
    return bound_value(req), ""


def verify(run, requests) -> list[BoundVerdict]:
    """One verdict per request against a completed run.

    ``run`` is a RunRecord (or anything exposing the same measurement
    attributes).  Schedule mismatches, missing traces, and broken theorem
    preconditions yield inapplicable verdicts, never exceptions.
    """
    verdicts = []
    for req in requests:
        tid = req.theorem_id
        resolved, reason = _check_applicable(run, req)
        if resolved is None:
            verdicts.append(_inapplicable(tid, reason))
            continue
        measured, m_margin, m_note = _measured_for(run, tid)
        if measured is None:
            verdicts.append(_inapplicable(tid, m_note))
            continue
        notes = [m_note] if m_note else []
        if tid in ("static_i", "static_ii") and resolved.L < measured - m_margin:
            verdicts.append(_inapplicable(
                tid, f"precondition failed: L={resolved.L:g} is below the measured loss {measured:g}"))
            continue
        if tid == "static_iii" and resolved.L < max(resolved.expert_loss, resolved.expert_complexity):
            verdicts.append(_inapplicable(
                tid, "precondition failed: L must dominate the comparator's loss and complexity"))
            continue
        bound, sweep_note = _tightest_bound(run, resolved)
        if sweep_note:
            notes.append(sweep_note)
        if adaptive_ii_log_floored(resolved):
            notes.append("min_loss <= 1: logarithm floored at 0")
        margin = m_margin + _EXACT_MARGIN
        if tid == "lower_uniform":
            holds = measured >= bound - margin
            slack = measured - bound
            direction = "lower"
        else:
            holds = measured <= bound + margin
            slack = bound - measured
            direction = "upper"
        verdicts.append(BoundVerdict(
            tid, float(bound), float(measured), float(slack), margin,
            bool(holds), True, direction, "; ".join(notes)))
    return verdicts
