"""Reference machinery: exact MDP expansion, value iteration, LP vertices."""

import math

import numpy as np
import pytest

from jamscatter.env import EnvConfig, EnvState, state_index
from jamscatter.jammer import JammerConfig, optimal_strategy
from jamscatter.oracle import (
    ExplicitMdp,
    chi2_threshold,
    clamped_poisson_pmf,
    enumerate_mdp,
    finite_diff_grad,
    greedy_policy,
    lp_vertices,
    value_iteration,
)


def tiny_config(**overrides):
    base = dict(
        eta=0.5,
        lam=1.0,
        D=2,
        E=2,
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


def test_clamped_pmf_is_a_distribution_with_folded_tails():
    pmf = clamped_poisson_pmf(1, 2, 1.5)
    assert sum(pmf.values()) == pytest.approx(1.0, abs=1e-12)
    assert set(pmf) == {1, 2}
    p0 = math.exp(-1.5)
    p1 = 1.5 * p0
    assert pmf[1] == pytest.approx(p0 + p1)  # below-range mass folds down


def test_clamped_pmf_degenerate_bracket():
    assert clamped_poisson_pmf(3, 3, 3.0) == {3: 1.0}
    assert clamped_poisson_pmf(4, 2, 3.0) == {4: 1.0}


def test_enumerate_requires_infinite_latency_threshold():
    with pytest.raises(ValueError):
        enumerate_mdp(tiny_config(t_th=3))


def test_enumerate_refuses_large_state_spaces():
    with pytest.raises(ValueError):
        enumerate_mdp(tiny_config(D=60, E=60))


def test_transition_rows_are_distributions():
    mdp = enumerate_mdp(tiny_config())
    sums = mdp.transitions.sum(axis=2)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert (mdp.transitions >= 0).all()


def test_expected_reward_for_deterministic_transmit():
    config = tiny_config()
    mdp = enumerate_mdp(config)
    s = state_index(0, 0, 2, 2, config)
    assert mdp.rewards[s, 1] == pytest.approx(2.0)  # clear channel, full send
    s_jammed = state_index(0, 1, 2, 2, config)
    assert mdp.rewards[s_jammed, 1] == 0.0


def test_expected_reward_marginalizes_hidden_level():
    """Backscatter reward under j = 1 averages over the level split."""
    config = tiny_config(jammer=JammerConfig(p_avg=11.0))
    strategy = optimal_strategy(config.jammer)
    probs = np.array(strategy.probs)
    cond = probs[1:] / probs[1:].sum()
    expected = sum(
        p * min(2, config.d_jam[n + 1]) for n, p in enumerate(cond) if p > 0
    )
    mdp = enumerate_mdp(config)
    s = state_index(0, 1, 2, 0, config)
    assert mdp.rewards[s, 3] == pytest.approx(expected)


def test_next_flag_marginals_match_the_draw_probabilities():
    config = tiny_config(eta=0.3)
    mdp = enumerate_mdp(config)
    x0 = optimal_strategy(config.jammer).probs[0]
    s = state_index(0, 0, 1, 1, config)
    row = mdp.transitions[s, 0]  # hold keeps internals deterministic
    mass_c0 = sum(
        row[state_index(0, j, d, e, config)]
        for j in (0, 1)
        for d in range(config.D + 1)
        for e in range(config.E + 1)
    )
    mass_j0 = sum(
        row[state_index(c, 0, d, e, config)]
        for c in (0, 1)
        for d in range(config.D + 1)
        for e in range(config.E + 1)
    )
    assert mass_c0 == pytest.approx(0.3)
    assert mass_j0 == pytest.approx(x0)


def hand_mdp(gamma_unused=None):
    # two states cycling 0 -> 1 -> 0, reward 1 only when leaving state 0
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = 1.0
    R = np.array([[1.0], [0.0]])
    return ExplicitMdp(2, 1, P, R, None)


def test_value_iteration_solves_a_cycle_exactly():
    q = value_iteration(hand_mdp(), gamma=0.5, tol=1e-12)
    assert q[0, 0] == pytest.approx(1.0 / 0.75, abs=1e-9)
    assert q[1, 0] == pytest.approx(0.5 / 0.75, abs=1e-9)


def test_value_iteration_is_deterministic():
    mdp = enumerate_mdp(tiny_config())
    a = value_iteration(mdp, 0.9, tol=1e-10)
    b = value_iteration(mdp, 0.9, tol=1e-10)
    np.testing.assert_array_equal(a, b)


def test_value_iteration_sweep_cap():
    mdp = hand_mdp()
    with pytest.raises(RuntimeError):
        value_iteration(mdp, gamma=0.999, tol=1e-15, max_sweeps=3)


def test_greedy_policy_breaks_ties_low():
    q = np.array([[1.0, 1.0], [0.0, 2.0]])
    np.testing.assert_array_equal(greedy_policy(q), [1, 2])


def test_lp_vertices_are_feasible_and_match_the_solver():
    rng = np.random.default_rng(21)
    for _ in range(10):
        raw = np.unique(rng.uniform(0.5, 25.0, size=int(rng.integers(1, 6))))
        config = JammerConfig(
            powers=(0.0, *raw),
            weights=(0.0, *rng.uniform(0.0, 4.0, size=len(raw))),
            p_avg=float(rng.uniform(0.1, raw[-1])),
        )
        vertices, best_value, best_probs = lp_vertices(config)
        for value, spend, _, x in vertices:
            assert x.sum() == pytest.approx(1.0)
            assert (x >= 0.0).all()
            assert spend <= config.p_avg + 1e-9
        s = optimal_strategy(config)
        assert best_value == s.value
        assert best_probs == s.probs


def test_finite_differences_on_an_analytic_function():
    a = np.array([1.0, -2.0, 0.5])
    b = np.array([[2.0, 0.0]])

    def loss():
        return float(np.sum(a**2) + 3.0 * np.sum(b))

    ga, gb = finite_diff_grad(loss, [a, b])
    np.testing.assert_allclose(ga, 2 * a, atol=1e-6)
    np.testing.assert_allclose(gb, 3.0, atol=1e-6)
    np.testing.assert_array_equal(a, [1.0, -2.0, 0.5])  # restored in place


def test_chi2_threshold_tracks_the_exact_quantile():
    from scipy import stats

    for df in (3, 10, 40):
        z = 3.0
        exact = stats.chi2.ppf(stats.norm.cdf(z), df)
        assert chi2_threshold(df, z=z) == pytest.approx(exact, rel=0.03)
