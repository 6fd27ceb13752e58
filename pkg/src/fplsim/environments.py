"""Loss-sequence generators: adversarial patterns, coin flips, file playback.

Generators are sequential per run; ``reset()`` rewinds the stochastic ones
so a run can be replayed bit-exactly from its seed.
"""

from __future__ import annotations

import math

import numpy as np

from .core import DOMAIN_ENV, philox_generator
from .probability import WeightVector

__all__ = [
    "Environment",
    "FlKillerEnvironment",
    "BernoulliEnvironment",
    "GreedyAdversaryEnvironment",
    "PlaybackEnvironment",
    "load_loss_rows",
    "make_environment",
]


class Environment:
    """Base interface: per-step loss vectors, optionally conditioned on the
    predictor's exact decision distribution (adaptive adversaries)."""

    variant: str = "base"
    adaptive: bool = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one expert")
        self.n = int(n)

    def next_loss(self, t: int, context=None) -> np.ndarray:
        raise NotImplementedError

    def reset(self) -> None:
        pass


class FlKillerEnvironment(Environment):
    """Two experts; the alternating pattern on which the unperturbed leader
    picks the losing expert at every step after the first."""

    variant = "fl_killer"

    def __init__(self):
        super().__init__(2)

    def next_loss(self, t: int, context=None) -> np.ndarray:
        if t < 1:
            raise ValueError("step index must be >= 1")
        if t == 1:
            return np.array([0.0, 0.5])
        if t % 2 == 0:
            return np.array([1.0, 0.0])
        return np.array([0.0, 1.0])


class BernoulliEnvironment(Environment):
    """Independent {0,1} losses with fixed per-expert means."""

    variant = "bernoulli"

    def __init__(self, probs, seed: int = 0):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-d sequence")
        if (p < 0.0).any() or (p > 1.0).any():
            raise ValueError("probabilities must lie in [0, 1]")
        super().__init__(p.size)
        self.probs = p
        self.seed = int(seed)
        self.reset()

    def reset(self) -> None:
        self._gen = philox_generator(self.seed, DOMAIN_ENV)
        self._next_t = 1

    def next_loss(self, t: int, context=None) -> np.ndarray:
        if t != self._next_t:
            raise RuntimeError(
                f"bernoulli environment is sequential (expected t={self._next_t}, got {t}); "
                "reset() to replay"
            )
        self._next_t += 1
        return (self._gen.random(self.n) < self.probs).astype(float)


class GreedyAdversaryEnvironment(Environment):
    """Puts loss 1 on the heaviest coordinate of the decision distribution,
    0 elsewhere.  Attacking the distribution (not the realized pick) is the
    strongest move available before the decision is revealed."""

    variant = "greedy_adversary"
    adaptive = True

    def next_loss(self, t: int, context=None) -> np.ndarray:
        if context is None:
            raise ValueError("greedy adversary needs the exact decision distribution")
        w = context.weights if isinstance(context, WeightVector) else np.asarray(context, dtype=float)
        if w.size != self.n:
            raise ValueError(f"expected a distribution over {self.n} experts, got {w.size}")
        loss = np.zeros(self.n)
        loss[int(np.argmax(w))] = 1.0
        return loss


def load_loss_rows(path, n: int | None = None) -> np.ndarray:
    """Parse a playback file: one step per line, whitespace-separated losses
    in [0, 1], '#' lines ignored.  Errors carry the 1-based line number."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            try:
                values = [float(x) for x in fields]
            except ValueError:
                raise ValueError(f"{path}: row {lineno}: non-numeric loss entry") from None
            if n is None and not rows:
                n = len(values)
            if len(values) != n:
                raise ValueError(
                    f"{path}: row {lineno}: expected {n} losses, got {len(values)}"
                )
            if any(math.isnan(v) or v < 0.0 or v > 1.0 for v in values):
                raise ValueError(f"{path}: row {lineno}: losses must lie in [0, 1]")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no loss rows found")
    return np.asarray(rows, dtype=float)


class PlaybackEnvironment(Environment):
    variant = "playback"

    def __init__(self, path, n: int | None = None):
        self.rows = load_loss_rows(path, n)
        self.path = str(path)
        super().__init__(self.rows.shape[1])

    @property
    def horizon(self) -> int:
        return int(self.rows.shape[0])

    def next_loss(self, t: int, context=None) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"step {t} outside the recorded horizon 1..{self.horizon}")
        return self.rows[t - 1].copy()


def make_environment(variant: str, *, n: int | None = None, probs=None,
                     seed: int = 0, path=None) -> Environment:
    if variant == "fl_killer":
        if n is not None and n != 2:
            raise ValueError("fl_killer is a two-expert environment")
        return FlKillerEnvironment()
    if variant == "bernoulli":
        if probs is None:
            raise ValueError("bernoulli environment needs per-expert probabilities")
        env = BernoulliEnvironment(probs, seed)
        if n is not None and env.n != n:
            raise ValueError(f"bernoulli probs cover {env.n} experts, run has {n}")
        return env
    if variant == "greedy_adversary":
        if n is None:
            raise ValueError("greedy_adversary needs the expert count")
        return GreedyAdversaryEnvironment(n)
    if variant == "playback":
        if path is None:
            raise ValueError("playback environment needs a file path")
        return PlaybackEnvironment(path, n)
    raise ValueError(f"unknown environment variant {variant!r}")
