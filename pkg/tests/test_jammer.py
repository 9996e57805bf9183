"""Budget-constrained jammer strategy solver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jamscatter.jammer import (
    JammerConfig,
    empirical_avg_power,
    optimal_strategy,
    sample_level,
)


def default_config(p_avg=7.0):
    return JammerConfig(p_avg=p_avg)


def test_default_budget_goes_all_in_on_level_one():
    """At a 7 W budget with the default tables the best play is always-on 7 W.

    Levels 1 and 3 tie at 1/7 packet per watt; the budget-tight mixtures
    all reach value 1.0, and the lowest-pair rule settles on pure level 1.
    """
    s = optimal_strategy(default_config())
    assert s.value == pytest.approx(1.0)
    assert s.probs == pytest.approx((0.0, 1.0, 0.0, 0.0))
    assert s.spend(default_config()) == pytest.approx(7.0)


def test_half_budget_splits_idle_and_level_one():
    s = optimal_strategy(default_config(p_avg=3.5))
    assert s.probs == pytest.approx((0.5, 0.5, 0.0, 0.0))
    assert s.value == pytest.approx(0.5)


def test_zero_weights_mean_idle():
    config = JammerConfig(weights=(0.0, 0.0, 0.0, 0.0))
    s = optimal_strategy(config)
    assert s.probs == (1.0, 0.0, 0.0, 0.0)
    assert s.value == 0.0


def test_rich_budget_picks_best_single_level():
    # p_avg at the top power makes every level affordable outright
    config = JammerConfig(p_avg=21.0)
    s = optimal_strategy(config)
    assert s.probs == pytest.approx((0.0, 0.0, 0.0, 1.0))
    assert s.value == pytest.approx(3.0)


def test_value_nondecreasing_in_budget():
    values = [optimal_strategy(default_config(p)).value for p in np.linspace(0.5, 21, 42)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_validation_rejects_malformed_tables():
    with pytest.raises(ValueError):
        JammerConfig(powers=(1.0, 7.0), weights=(0.0, 1.0), p_avg=5.0)
    with pytest.raises(ValueError):
        JammerConfig(powers=(0.0, 7.0, 7.0), weights=(0.0, 1.0, 2.0), p_avg=5.0)
    with pytest.raises(ValueError):
        JammerConfig(powers=(0.0, 7.0), weights=(0.0, -1.0), p_avg=5.0)
    with pytest.raises(ValueError):
        JammerConfig(p_avg=22.0)


@settings(max_examples=60, deadline=None)
@given(
    raw=st.lists(st.floats(0.5, 40.0), min_size=1, max_size=6, unique=True),
    weights=st.lists(st.floats(0.0, 5.0), min_size=6, max_size=6),
    frac=st.floats(0.05, 1.0),
)
def test_strategy_invariants_hold_for_random_tables(raw, weights, frac):
    powers = (0.0, *sorted(raw))
    config = JammerConfig(
        powers=powers,
        weights=(0.0, *weights[: len(raw)]),
        p_avg=frac * powers[-1],
    )
    s = optimal_strategy(config)
    assert all(p >= -1e-12 for p in s.probs)
    assert sum(s.probs) == pytest.approx(1.0)
    assert s.spend(config) <= config.p_avg + 1e-9
    assert s.value >= 0.0


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_no_feasible_mixture_beats_the_solver(data):
    """Random feasible points never exceed the reported optimum."""
    raw = data.draw(st.lists(st.floats(1.0, 30.0), min_size=2, max_size=5, unique=True))
    powers = (0.0, *sorted(raw))
    weights = (0.0, *data.draw(
        st.lists(st.floats(0.0, 4.0), min_size=len(raw), max_size=len(raw))
    ))
    config = JammerConfig(powers=powers, weights=weights, p_avg=0.6 * powers[-1])
    s = optimal_strategy(config)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    for _ in range(50):
        x = rng.dirichlet(np.ones(len(powers)))
        if np.dot(x, powers) <= config.p_avg:
            assert np.dot(x, weights) <= s.value + 1e-9


def test_sample_level_matches_mixture_frequencies():
    config = default_config(p_avg=3.5)
    s = optimal_strategy(config)
    rng = np.random.default_rng(2)
    counts = np.zeros(len(s.probs))
    n = 20_000
    for _ in range(n):
        counts[sample_level(s, rng)] += 1
    np.testing.assert_allclose(counts / n, s.probs, atol=0.015)


def test_empirical_spend_respects_budget_on_average():
    config = default_config(p_avg=10.0)
    s = optimal_strategy(config)
    mean_power = empirical_avg_power(config, s, 20_000, np.random.default_rng(4))
    assert mean_power <= config.p_avg * 1.02
    assert mean_power == pytest.approx(s.spend(config), rel=0.03)
