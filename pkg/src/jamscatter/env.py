"""Slot-level simulator for the transmitter, its queue, and both RF sources.

State per slot: ambient channel busy flag c (1 while the ambient source
transmits), the jammer's true power level, the data queue (a FIFO of
packet ages), and the stored energy e. The learning agent never sees the
raw level, only a jam flag, and both flags pass through a detector that
can miss or false-alarm.

Actions (1-based, M rate entries):
    1        hold
    2        transmit up to d_hat_t packets, channel must be fully clear
    3        harvest energy from whichever sources are active
    4        backscatter queue packets onto active sources, no stored energy
    4 + m    transmit at reduced rate m while jammed, ambient idle

A slot resolves in a fixed order: apply the action, pop delivered
packets oldest first and settle energy, age the queue and discard
packets older than t_th, admit Poisson arrivals (overflow dropped), then
resample the ambient flag and the jammer level for the next slot.

Randomness contract for one `step` call, in order: an optional
clamped-Poisson draw when the action taps both active sources (harvest
or backscatter with c == 1 and level > 0), the arrival draw, one uniform
for the next ambient flag (idle when u < eta), one uniform for the next
jammer level. Each Poisson draw uses inversion by sequential search and
consumes exactly one uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jammer import JammerConfig, optimal_strategy, sample_level

__all__ = [
    "EnvConfig",
    "EnvState",
    "Observation",
    "StepOutcome",
    "LinkEnv",
    "Metrics",
    "MetricsAccumulator",
    "default_rate_table",
    "poisson_sample",
    "step",
    "reset",
    "observe",
    "metrics_update",
    "state_index",
    "num_states",
]


def default_rate_table(
    level_yields: tuple[int, ...] = (2, 1, 0),
    num_levels: int = 4,
) -> tuple[tuple[int, ...], ...]:
    """Reduced-rate delivery table: entry m tolerates jamming up to level m.

    Row m (1-based) yields level_yields[m - 1] packets at any level it
    tolerates, 0 elsewhere, so the best usable rate under level n
    delivers level_yields[n - 1].
    """
    rows = []
    for m in range(1, len(level_yields) + 1):
        row = [0] * num_levels
        for n in range(1, num_levels):
            if n <= m:
                row[n] = int(level_yields[m - 1])
        rows.append(tuple(row))
    return tuple(rows)


@dataclass(frozen=True)
class EnvConfig:
    """Static description of the link, the traffic, and the detector.

    eta:      probability the ambient source idles in a slot
    lam:      Poisson arrival rate, packets per slot (JSON key "lambda")
    D, E:     queue and energy-storage capacities
    t_th:     max in-queue age; math.inf disables latency discarding
    d_hat_t:  packets per clear-channel transmit slot
    e_t:      energy units per actively transmitted packet
    d_hat_b:  packets per ambient-backscatter slot
    e_h:      energy harvested from the ambient source per slot
    e_jam:    energy harvested from the jammer at each level
    d_jam:    packets backscattered off the jammer at each level
    rates:    reduced-rate table, row m = deliveries of rate entry m by level
    p_md:     probability an active source reads as idle
    p_fa:     probability an idle source reads as active
    jammer:   the jammer the transmitter faces
    """

    eta: float = 0.5
    lam: float = 2.0
    D: int = 20
    E: int = 20
    t_th: float = 3
    d_hat_t: int = 4
    e_t: int = 1
    d_hat_b: int = 1
    e_h: int = 2
    e_jam: tuple[int, ...] = (0, 2, 3, 4)
    d_jam: tuple[int, ...] = (0, 1, 2, 3)
    rates: tuple[tuple[int, ...], ...] = field(default_factory=default_rate_table)
    p_md: float = 0.0
    p_fa: float = 0.0
    jammer: JammerConfig = field(default_factory=JammerConfig)

    def __post_init__(self) -> None:
        levels = len(self.jammer.powers)
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.D < 1 or self.E < 1:
            raise ValueError("D and E must be at least 1")
        if self.t_th < 1:
            raise ValueError("t_th must be at least 1")
        if self.e_t < 1:
            raise ValueError("e_t must be at least 1 (it divides the energy store)")
        if min(self.d_hat_t, self.d_hat_b, self.e_h) < 0:
            raise ValueError("d_hat_t, d_hat_b and e_h must be non-negative")
        for name, seq in (("e_jam", self.e_jam), ("d_jam", self.d_jam)):
            if len(seq) != levels:
                raise ValueError(f"{name} must have one entry per jammer level")
            if seq[0] != 0:
                raise ValueError(f"{name}[0] must be 0 (idle jammer)")
            if any(b < a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be non-decreasing")
            if any(v < 0 for v in seq):
                raise ValueError(f"{name} entries must be non-negative")
        if not self.rates:
            raise ValueError("rates needs at least one entry")
        for m, row in enumerate(self.rates, start=1):
            if len(row) != levels:
                raise ValueError(f"rates[{m}] must have one entry per jammer level")
            if any(v < 0 for v in row):
                raise ValueError(f"rates[{m}] entries must be non-negative")
        if not 0.0 <= self.p_md <= 1.0 or not 0.0 <= self.p_fa <= 1.0:
            raise ValueError("p_md and p_fa must be probabilities")

    @property
    def num_actions(self) -> int:
        return 4 + len(self.rates)


@dataclass(frozen=True)
class EnvState:
    """True state: ambient flag, jammer level, packet ages (oldest first), energy."""

    c: int
    level: int
    ages: tuple[int, ...]
    e: int

    @property
    def d(self) -> int:
        return len(self.ages)

    @property
    def jam(self) -> int:
        return 1 if self.level > 0 else 0


@dataclass(frozen=True)
class Observation:
    """What the agent sees: detector outputs plus exact queue and energy."""

    c: int
    j: int
    d: int
    e: int


@dataclass(frozen=True)
class StepOutcome:
    reward: int
    delivered: int
    dropped_overflow: int
    discarded_latency: int
    harvested: int
    action_effective: bool
    arrivals: int
    queue_after: int
    delivered_age_sum: int


def poisson_sample(lam: float, rng: np.random.Generator) -> int:
    """Poisson draw by CDF inversion. Exact for the small rates used here."""
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    acc = p
    while u >= acc and k < 4000:
        k += 1
        p *= lam / k
        acc += p
    return k


def _clamped_sum(lo: int, hi: int, rng: np.random.Generator) -> int:
    """Joint two-source yield: Poisson at the bracket midpoint, clamped."""
    if lo >= hi:
        rng.random()  # keep the draw count fixed for the step contract
        return lo
    draw = poisson_sample(0.5 * (lo + hi), rng)
    return min(hi, max(lo, draw))


def step(
    state: EnvState,
    action: int,
    config: EnvConfig,
    rng: np.random.Generator,
    strategy=None,
) -> tuple[EnvState, StepOutcome]:
    """Resolve one slot. Infeasible actions change nothing and pay 0.

    `strategy` is the jammer's mixed strategy; callers in tight loops can
    pass it to skip the per-call cache lookup.
    """
    if not 1 <= action <= config.num_actions:
        raise ValueError(f"action must be in [1, {config.num_actions}]")

    c, n, e = state.c, state.level, state.e
    ages = list(state.ages)
    d = len(ages)
    delivered = 0
    harvested = 0

    if action == 2:
        if c == 0 and n == 0:
            delivered = min(config.d_hat_t, d, e // config.e_t)
            e -= delivered * config.e_t
    elif action == 3:
        if c == 1 and n == 0:
            gain = config.e_h
        elif c == 0 and n > 0:
            gain = config.e_jam[n]
        elif c == 1 and n > 0:
            gain = _clamped_sum(
                max(config.e_h, config.e_jam[n]),
                config.e_h + config.e_jam[n],
                rng,
            )
        else:
            gain = 0
        harvested = min(config.E - e, gain)
        e += harvested
    elif action == 4:
        if c == 1 and n == 0:
            rate = config.d_hat_b
        elif c == 0 and n > 0:
            rate = config.d_jam[n]
        elif c == 1 and n > 0:
            rate = _clamped_sum(
                min(config.d_hat_b, config.d_jam[n]),
                config.d_hat_b + config.d_jam[n],
                rng,
            )
        else:
            rate = 0
        delivered = min(d, rate)
    elif action >= 5:
        if c == 0 and n > 0 and e > 0:
            delivered = min(config.rates[action - 5][n], d, e // config.e_t)
            e -= delivered * config.e_t

    delivered_age_sum = sum(ages[:delivered])
    del ages[:delivered]

    discarded = 0
    if ages:
        kept = []
        for age in ages:
            age += 1
            if age > config.t_th:
                discarded += 1
            else:
                kept.append(age)
        ages = kept

    arrivals = poisson_sample(config.lam, rng)
    accepted = min(arrivals, config.D - len(ages))
    ages.extend([0] * accepted)

    if strategy is None:
        strategy = optimal_strategy(config.jammer)
    c_next = 0 if rng.random() < config.eta else 1
    level_next = sample_level(strategy, rng)

    next_state = EnvState(c=c_next, level=level_next, ages=tuple(ages), e=e)
    outcome = StepOutcome(
        reward=delivered,
        delivered=delivered,
        dropped_overflow=arrivals - accepted,
        discarded_latency=discarded,
        harvested=harvested,
        action_effective=delivered > 0 or harvested > 0,
        arrivals=arrivals,
        queue_after=len(ages),
        delivered_age_sum=delivered_age_sum,
    )
    return next_state, outcome


def reset(config: EnvConfig, rng: np.random.Generator) -> EnvState:
    """Empty queue, empty store, freshly sampled sources."""
    c = 0 if rng.random() < config.eta else 1
    level = sample_level(optimal_strategy(config.jammer), rng)
    return EnvState(c=c, level=level, ages=(), e=0)


def observe(state: EnvState, config: EnvConfig, rng: np.random.Generator) -> Observation:
    """Pass both activity flags through the detector; d and e are exact.

    With p_md == p_fa == 0 this is deterministic and consumes no
    randomness; otherwise it consumes one uniform per flag.
    """
    c, j = state.c, state.jam
    if config.p_md > 0.0 or config.p_fa > 0.0:
        c = _flip(c, config, rng)
        j = _flip(j, config, rng)
    return Observation(c=c, j=j, d=state.d, e=state.e)


def _flip(bit: int, config: EnvConfig, rng: np.random.Generator) -> int:
    u = rng.random()
    if bit == 1:
        return 0 if u < config.p_md else 1
    return 1 if u < config.p_fa else 0


def state_index(c: int, j: int, d: int, e: int, config: EnvConfig) -> int:
    """Flat index over (c, j, d, e), shared by the table learner and oracle."""
    return ((c * 2 + j) * (config.D + 1) + d) * (config.E + 1) + e


def num_states(config: EnvConfig) -> int:
    return 4 * (config.D + 1) * (config.E + 1)


class LinkEnv:
    """Stateful wrapper owning the current state and a random source."""

    def __init__(self, config: EnvConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.strategy = optimal_strategy(config.jammer)
        self.state = reset(config, rng)

    def reset(self) -> EnvState:
        self.state = reset(self.config, self.rng)
        return self.state

    def step(self, action: int) -> StepOutcome:
        self.state, outcome = step(self.state, action, self.config, self.rng, self.strategy)
        return outcome

    def observe(self) -> Observation:
        return observe(self.state, self.config, self.rng)


@dataclass
class Metrics:
    throughput: float
    packet_loss: float
    pdr: float
    avg_queue: float
    avg_delay: float


@dataclass
class MetricsAccumulator:
    """Running totals over simulated slots."""

    slots: int = 0
    delivered: int = 0
    arrived: int = 0
    dropped_overflow: int = 0
    discarded_latency: int = 0
    queue_sum: int = 0
    delay_sum: int = 0

    def finalize(self) -> Metrics:
        if self.slots == 0:
            return Metrics(0.0, 0.0, 0.0, 0.0, 0.0)
        lost = self.dropped_overflow + self.discarded_latency
        return Metrics(
            throughput=self.delivered / self.slots,
            packet_loss=lost / self.slots,
            pdr=self.delivered / self.arrived if self.arrived else 0.0,
            avg_queue=self.queue_sum / self.slots,
            avg_delay=self.delay_sum / self.delivered if self.delivered else 0.0,
        )


def metrics_update(acc: MetricsAccumulator, outcome: StepOutcome, arrivals: int) -> None:
    """Fold one slot into the running totals.

    Queue length is sampled at end of slot; delay counts the in-queue
    age of each delivered packet at the moment it left.
    """
    acc.slots += 1
    acc.delivered += outcome.delivered
    acc.arrived += arrivals
    acc.dropped_overflow += outcome.dropped_overflow
    acc.discarded_latency += outcome.discarded_latency
    acc.queue_sum += outcome.queue_after
    acc.delay_sum += outcome.delivered_age_sum
