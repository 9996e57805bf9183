"""Average-power-constrained jammer.

The jammer picks a power level each slot from a mixed strategy x over
its levels (level 0 is idle). It maximizes the expected number of
disrupted packets sum_n x_n * w_n subject to sum_n x_n = 1 and the
average-power budget sum_n x_n * P_n <= p_avg.

With two non-trivial constraints every basic optimum puts mass on at
most two levels, so the solver enumerates single levels within budget
and budget-tight two-level mixtures and keeps the best. Ties are broken
toward spending the whole budget, then toward the lowest pair of level
indices; a jammer whose optimum disrupts nothing stays idle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "JammerConfig",
    "JammerStrategy",
    "optimal_strategy",
    "sample_level",
    "empirical_avg_power",
]

# Relative slack used when comparing candidate objectives for ties.
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class JammerConfig:
    """Power levels, per-level disruption weights, and the average budget.

    powers:  strictly increasing levels in watts, powers[0] == 0 (idle)
    weights: expected packets disrupted at each level, weights[0] == 0
    p_avg:   average-power budget, 0 < p_avg <= max power
    phi:     jammer-to-gateway attenuation, consumed by the SINR math
    """

    powers: tuple[float, ...] = (0.0, 7.0, 15.0, 21.0)
    weights: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0)
    p_avg: float = 7.0
    phi: float = 1.0

    def __post_init__(self) -> None:
        if len(self.powers) < 2:
            raise ValueError("powers needs at least an idle level and one attack level")
        if len(self.powers) != len(self.weights):
            raise ValueError("powers and weights must have equal length")
        if self.powers[0] != 0.0:
            raise ValueError("powers[0] must be 0 (idle level)")
        if self.weights[0] != 0.0:
            raise ValueError("weights[0] must be 0 (idle disrupts nothing)")
        if any(b <= a for a, b in zip(self.powers, self.powers[1:])):
            raise ValueError("powers must be strictly increasing")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if not 0.0 < self.p_avg <= self.p_max:
            raise ValueError("p_avg must be in (0, max power]")
        if self.phi < 0:
            raise ValueError("phi must be non-negative")

    @property
    def p_max(self) -> float:
        return self.powers[-1]

    @property
    def num_levels(self) -> int:
        """Number of non-idle levels."""
        return len(self.powers) - 1


@dataclass(frozen=True)
class JammerStrategy:
    """A mixed strategy over the levels and its disruption value."""

    probs: tuple[float, ...]
    value: float

    def spend(self, config: JammerConfig) -> float:
        return float(np.dot(self.probs, config.powers))


def _candidates(config: JammerConfig) -> list[tuple[float, float, tuple[int, int], np.ndarray]]:
    """All basic feasible points as (value, spend, pair, x) tuples.

    Single levels within budget appear as pair (n, n); budget-tight
    two-level solutions as (i, k) with i < k, including degenerate ones
    whose weight sits entirely on one endpoint.
    """
    powers = np.asarray(config.powers, dtype=np.float64)
    weights = np.asarray(config.weights, dtype=np.float64)
    p_avg = config.p_avg
    out = []

    for n, p_n in enumerate(powers):
        if p_n <= p_avg:
            x = np.zeros(len(powers))
            x[n] = 1.0
            out.append((float(np.dot(x, weights)), float(np.dot(x, powers)), (n, n), x))

    for i in range(len(powers)):
        for k in range(i + 1, len(powers)):
            p_i, p_k = powers[i], powers[k]
            if not (p_i <= p_avg <= p_k):
                continue
            x = np.zeros(len(powers))
            x[i] = (p_k - p_avg) / (p_k - p_i)
            x[k] = (p_avg - p_i) / (p_k - p_i)
            out.append((float(np.dot(x, weights)), float(np.dot(x, powers)), (i, k), x))

    return out


def pick_best(candidates, num_levels: int) -> tuple[float, np.ndarray]:
    """Apply the tie-break to a candidate list; returns (value, x).

    Order: maximum value, then maximum spend, then lowest (i, k) pair.
    If the best achievable value is 0 the jammer idles.
    """
    best_value = max(value for value, _, _, _ in candidates)
    scale = max(1.0, abs(best_value))
    if best_value <= _TIE_RTOL * scale:
        x = np.zeros(num_levels + 1)
        x[0] = 1.0
        return 0.0, x

    tied = [c for c in candidates if c[0] >= best_value - _TIE_RTOL * scale]
    best_spend = max(spend for _, spend, _, _ in tied)
    spend_scale = max(1.0, abs(best_spend))
    tied = [c for c in tied if c[1] >= best_spend - _TIE_RTOL * spend_scale]
    _, _, _, x = min(tied, key=lambda c: c[2])
    return best_value, x


@lru_cache(maxsize=64)
def optimal_strategy(config: JammerConfig) -> JammerStrategy:
    """Best mixed strategy under the budget, with deterministic tie-breaks."""
    value, x = pick_best(_candidates(config), config.num_levels)
    return JammerStrategy(probs=tuple(float(v) for v in x), value=value)


def sample_level(strategy: JammerStrategy, rng: np.random.Generator) -> int:
    """Draw a level index from the strategy. Consumes one uniform."""
    u = rng.random()
    acc = 0.0
    for n, p in enumerate(strategy.probs):
        acc += p
        if u < acc:
            return n
    return len(strategy.probs) - 1


def empirical_avg_power(
    config: JammerConfig,
    strategy: JammerStrategy,
    draws: int,
    rng: np.random.Generator,
) -> float:
    """Mean transmit power over `draws` sampled slots."""
    total = 0.0
    for _ in range(draws):
        total += config.powers[sample_level(strategy, rng)]
    return total / draws
