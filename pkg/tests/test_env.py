"""Slot mechanics of the link environment.

The scripted tests exploit the documented draw order inside step():
an optional clamped-sum uniform for two-source actions, then the
arrival draw, then the ambient flag, then the jammer level. A stub
rng with a fixed list of uniforms makes every outcome exact.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jamscatter.env import (
    EnvConfig,
    EnvState,
    LinkEnv,
    num_states,
    observe,
    poisson_sample,
    reset,
    state_index,
    step,
)
from jamscatter.jammer import JammerConfig


class ScriptedRng:
    """Plays back a fixed uniform sequence; fails loudly if exhausted."""

    def __init__(self, draws):
        self.draws = list(draws)

    def random(self):
        return self.draws.pop(0)


def small_config(**overrides):
    base = dict(
        eta=0.5,
        lam=1.0,
        D=3,
        E=3,
        t_th=math.inf,
        d_hat_t=2,
        e_t=1,
        d_hat_b=1,
        e_h=2,
        e_jam=(0, 1, 2, 2),
        d_jam=(0, 1, 1, 2),
        rates=((0, 1, 1, 0),),
        jammer=JammerConfig(p_avg=3.5),
    )
    base.update(overrides)
    return EnvConfig(**base)


# Poisson(1.0) CDF: 0.3679 / 0.7358 / 0.9197 / 0.9810, so a uniform of
# 0.5 reads as one arrival, 0.1 as none, 0.99 as four.


def test_transmit_on_clear_channel():
    config = small_config()
    state = EnvState(c=0, level=0, ages=(2, 1, 0), e=2)
    rng = ScriptedRng([0.5, 0.7, 0.2])
    nxt, out = step(state, 2, config, rng)
    assert out.delivered == 2 and out.reward == 2
    assert out.delivered_age_sum == 3  # the two oldest packets left
    assert out.arrivals == 1 and out.dropped_overflow == 0
    assert nxt == EnvState(c=1, level=0, ages=(1, 0), e=0)
    assert rng.draws == []


def test_transmit_blocked_by_jamming_changes_nothing_internal():
    config = small_config()
    state = EnvState(c=0, level=1, ages=(0,), e=3)
    nxt, out = step(state, 2, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.delivered == 0 and not out.action_effective
    assert nxt.ages == (1,) and nxt.e == 3


def test_latency_discard_after_aging():
    config = small_config(t_th=3)
    state = EnvState(c=0, level=1, ages=(3, 1), e=0)
    nxt, out = step(state, 1, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.discarded_latency == 1
    assert nxt.ages == (2,)


def test_harvest_ambient_clips_at_capacity():
    config = small_config()
    state = EnvState(c=1, level=0, ages=(), e=2)
    nxt, out = step(state, 3, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.harvested == 1  # e_h is 2 but only one unit fits
    assert nxt.e == 3


def test_harvest_from_jammer_signal():
    config = small_config()
    state = EnvState(c=0, level=2, ages=(), e=0)
    nxt, out = step(state, 3, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.harvested == config.e_jam[2] == 2


def test_two_source_harvest_clamps_low_draw():
    # lo = max(2, 1) = 2, hi = 3; a tiny uniform maps to 0, clamped to 2
    config = small_config()
    state = EnvState(c=1, level=1, ages=(), e=0)
    rng = ScriptedRng([0.05, 0.1, 0.2, 0.2])
    nxt, out = step(state, 3, config, rng)
    assert out.harvested == 2
    assert rng.draws == []


def test_two_source_harvest_clamps_high_draw():
    config = small_config()
    state = EnvState(c=1, level=1, ages=(), e=0)
    _, out = step(state, 3, config, ScriptedRng([0.99, 0.1, 0.2, 0.2]))
    assert out.harvested == 3


def test_backscatter_on_jammer_carrier():
    config = small_config()
    state = EnvState(c=0, level=3, ages=(0, 0, 0), e=0)
    _, out = step(state, 4, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.delivered == config.d_jam[3] == 2


def test_backscatter_needs_a_carrier():
    config = small_config()
    state = EnvState(c=0, level=0, ages=(0, 0), e=0)
    _, out = step(state, 4, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.delivered == 0


def test_rate_adaptation_delivers_under_jamming():
    config = small_config()
    state = EnvState(c=0, level=2, ages=(1, 0), e=2)
    nxt, out = step(state, 5, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.delivered == 1
    assert nxt.e == 1


def test_rate_adaptation_idle_on_clear_channel():
    config = small_config()
    state = EnvState(c=0, level=0, ages=(1, 0), e=2)
    nxt, out = step(state, 5, config, ScriptedRng([0.1, 0.2, 0.2]))
    assert out.delivered == 0 and nxt.e == 2


def test_queue_overflow_drops_excess_arrivals():
    config = small_config()
    state = EnvState(c=0, level=0, ages=(0,), e=0)
    _, out = step(state, 1, config, ScriptedRng([0.99, 0.2, 0.2]))
    assert out.arrivals == 4
    assert out.dropped_overflow == 2  # two fit next to the aged survivor
    assert out.queue_after == 3


def test_invalid_action_raises():
    config = small_config()
    state = EnvState(c=0, level=0, ages=(), e=0)
    with pytest.raises(ValueError):
        step(state, 6, config, ScriptedRng([0.1, 0.2, 0.2]))


def test_poisson_sampler_matches_numpy_mean():
    rng = np.random.default_rng(0)
    draws = [poisson_sample(2.0, rng) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(2.0, abs=0.05)
    assert np.var(draws) == pytest.approx(2.0, abs=0.1)


def test_state_index_is_a_bijection():
    config = small_config()
    seen = set()
    for c in range(2):
        for j in range(2):
            for d in range(config.D + 1):
                for e in range(config.E + 1):
                    seen.add(state_index(c, j, d, e, config))
    assert seen == set(range(num_states(config)))


def test_observe_exact_detector_consumes_no_draws():
    config = small_config()
    state = EnvState(c=1, level=2, ages=(0,), e=1)
    obs = observe(state, config, ScriptedRng([]))
    assert (obs.c, obs.j, obs.d, obs.e) == (1, 1, 1, 1)


def test_observe_certain_miss_and_false_alarm():
    config = small_config(p_md=1.0, p_fa=1.0)
    state = EnvState(c=1, level=0, ages=(), e=0)
    obs = observe(state, config, ScriptedRng([0.5, 0.5]))
    assert obs.c == 0  # active ambient missed for certain
    assert obs.j == 1  # idle jammer reported for certain


def test_link_env_advances_and_resets():
    env = LinkEnv(small_config(), np.random.default_rng(8))
    first = env.state
    out = env.step(3)
    assert out.reward >= 0
    assert env.state is not first
    env.reset()
    assert env.state.ages == () and env.state.e == 0


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    lam=st.floats(0.2, 4.0),
    action_seed=st.integers(0, 2**31),
)
def test_random_walk_preserves_conservation_laws(seed, lam, action_seed):
    config = small_config(lam=lam, t_th=4)
    rng = np.random.default_rng(seed)
    actions = np.random.default_rng(action_seed)
    state = reset(config, rng)
    for _ in range(120):
        a = int(actions.integers(1, config.num_actions + 1))
        nxt, out = step(state, a, config, rng)
        assert 0 <= nxt.d <= config.D and 0 <= nxt.e <= config.E
        spent = out.delivered * config.e_t if a == 2 or a >= 5 else 0
        assert nxt.e == state.e - spent + out.harvested
        kept = state.d - out.delivered - out.discarded_latency
        assert out.queue_after == kept + out.arrivals - out.dropped_overflow
        assert all(age <= config.t_th for age in nxt.ages)
        assert out.reward == out.delivered
        state = nxt
