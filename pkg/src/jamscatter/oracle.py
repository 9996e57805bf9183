"""Independent reference machinery used to certify the fast paths.

None of this is needed to run experiments. It exists so the test suite
can check the simulator, the jammer solver, and the learners against
slow but exact alternatives:

* enumerate_mdp expands a small configuration into explicit transition
  and reward tensors over the agent-visible state (c, j, d, e),
  marginalizing the hidden jammer level and expanding every stochastic
  yield exactly.
* value_iteration solves that tensor MDP to a fixed point.
* lp_vertices enumerates every basic feasible point of the jammer's
  budget LP through generic active-set algebra.
* finite_diff_grad recomputes network gradients by central differences.

The MDP expansion requires latency discarding to be off (a queue of
ages cannot be collapsed to a count otherwise) and refuses state spaces
above 10^4 entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, state_index, num_states
from .jammer import JammerConfig, optimal_strategy, pick_best

__all__ = [
    "ExplicitMdp",
    "enumerate_mdp",
    "value_iteration",
    "greedy_policy",
    "lp_vertices",
    "finite_diff_grad",
    "chi2_threshold",
]

_MAX_STATES = 10_000


def _poisson_pmf(lam: float, k_max: int) -> np.ndarray:
    """pmf values for k = 0..k_max."""
    out = np.empty(k_max + 1)
    p = math.exp(-lam)
    out[0] = p
    for k in range(1, k_max + 1):
        p *= lam / k
        out[k] = p
    return out


def clamped_poisson_pmf(lo: int, hi: int, mean: float) -> dict[int, float]:
    """Distribution of a Poisson(mean) draw clamped into [lo, hi]."""
    if lo >= hi:
        return {lo: 1.0}
    base = _poisson_pmf(mean, hi)
    pmf = {k: float(base[k]) for k in range(lo, hi + 1)}
    pmf[lo] += float(base[:lo].sum())
    pmf[hi] += float(1.0 - base.sum())
    return pmf


def _arrival_pmf(lam: float, room: int) -> dict[int, float]:
    """Accepted arrivals given queue headroom; the tail lands on `room`."""
    if room == 0:
        return {0: 1.0}
    base = _poisson_pmf(lam, room)
    pmf = {k: float(base[k]) for k in range(room)}
    pmf[room] = float(1.0 - base[:room].sum())
    return pmf


@dataclass
class ExplicitMdp:
    """Dense (S, A, S) transition tensor and (S, A) expected rewards."""

    num_states: int
    num_actions: int
    transitions: np.ndarray
    rewards: np.ndarray
    config: EnvConfig


def _action_outcomes(c: int, n: int, d: int, e: int, action: int,
                     cfg: EnvConfig) -> list[tuple[float, int, int]]:
    """(probability, delivered, energy_after) for one slot's action phase."""
    if action == 2:
        if c == 0 and n == 0:
            k = min(cfg.d_hat_t, d, e // cfg.e_t)
            return [(1.0, k, e - k * cfg.e_t)]
        return [(1.0, 0, e)]
    if action == 3:
        if c == 1 and n == 0:
            gains = {cfg.e_h: 1.0}
        elif c == 0 and n > 0:
            gains = {cfg.e_jam[n]: 1.0}
        elif c == 1 and n > 0:
            lo = max(cfg.e_h, cfg.e_jam[n])
            hi = cfg.e_h + cfg.e_jam[n]
            gains = clamped_poisson_pmf(lo, hi, 0.5 * (lo + hi))
        else:
            gains = {0: 1.0}
        return [(p, 0, min(cfg.E, e + g)) for g, p in gains.items()]
    if action == 4:
        if c == 1 and n == 0:
            bs = {cfg.d_hat_b: 1.0}
        elif c == 0 and n > 0:
            bs = {cfg.d_jam[n]: 1.0}
        elif c == 1 and n > 0:
            lo = min(cfg.d_hat_b, cfg.d_jam[n])
            hi = cfg.d_hat_b + cfg.d_jam[n]
            bs = clamped_poisson_pmf(lo, hi, 0.5 * (lo + hi))
        else:
            bs = {0: 1.0}
        return [(p, min(d, b), e) for b, p in bs.items()]
    if action >= 5:
        if c == 0 and n > 0 and e > 0:
            k = min(cfg.rates[action - 5][n], d, e // cfg.e_t)
            return [(1.0, k, e - k * cfg.e_t)]
        return [(1.0, 0, e)]
    return [(1.0, 0, e)]  # hold


def enumerate_mdp(config: EnvConfig) -> ExplicitMdp:
    """Expand the slot dynamics into exact tensors over (c, j, d, e).

    Requires config.t_th == math.inf: with latency discarding the true
    state carries individual packet ages and does not reduce to a
    count. The hidden jammer level is marginalized with its strategy
    conditioned on the jam flag, which is sound because levels are
    drawn independently each slot.
    """
    if not math.isinf(config.t_th):
        raise ValueError("enumerate_mdp needs t_th = math.inf (no latency discard)")
    S = num_states(config)
    if S > _MAX_STATES:
        raise ValueError(f"state space too large to expand ({S} > {_MAX_STATES})")

    strategy = optimal_strategy(config.jammer)
    x0 = strategy.probs[0]
    if x0 < 1.0:
        jam_levels = [
            (n, p / (1.0 - x0))
            for n, p in enumerate(strategy.probs)
            if n > 0 and p > 0.0
        ]
    else:
        # A jammer that never attacks leaves j = 1 unreachable; condition
        # on level 1 so those rows stay well-formed.
        jam_levels = [(1, 1.0)]
    level_dist = {0: [(0, 1.0)], 1: jam_levels}

    p_next_c = {0: config.eta, 1: 1.0 - config.eta}
    p_next_j = {0: x0, 1: 1.0 - x0}

    A = config.num_actions
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    arrival_cache: dict[int, dict[int, float]] = {}

    for c in (0, 1):
        for j in (0, 1):
            for d in range(config.D + 1):
                for e in range(config.E + 1):
                    s = state_index(c, j, d, e, config)
                    for action in range(1, A + 1):
                        a = action - 1
                        for n, p_n in level_dist[j]:
                            for p_o, delivered, e2 in _action_outcomes(c, n, d, e, action, config):
                                w = p_n * p_o
                                R[s, a] += w * delivered
                                d_left = d - delivered
                                room = config.D - d_left
                                if room not in arrival_cache:
                                    arrival_cache[room] = _arrival_pmf(config.lam, room)
                                for arr, p_a in arrival_cache[room].items():
                                    d2 = d_left + arr
                                    base = w * p_a
                                    for c2 in (0, 1):
                                        for j2 in (0, 1):
                                            p = base * p_next_c[c2] * p_next_j[j2]
                                            if p > 0.0:
                                                P[s, a, state_index(c2, j2, d2, e2, config)] += p
    return ExplicitMdp(S, A, P, R, config)


def value_iteration(mdp: ExplicitMdp, gamma: float, tol: float = 1e-10,
                    max_sweeps: int = 100_000) -> np.ndarray:
    """Iterate the Bellman optimality backup until the sup-norm change <= tol."""
    S, A = mdp.num_states, mdp.num_actions
    flat = mdp.transitions.reshape(S * A, S)
    q = np.zeros((S, A))
    for _ in range(max_sweeps):
        v = q.max(axis=1)
        q_next = mdp.rewards + gamma * (flat @ v).reshape(S, A)
        delta = np.abs(q_next - q).max()
        q = q_next
        if delta <= tol:
            return q
    raise RuntimeError("value iteration did not reach tolerance")


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Lowest-index greedy action (1-based) per state."""
    return q.argmax(axis=1) + 1


def lp_vertices(config: JammerConfig):
    """Every basic feasible point of the jammer LP, plus the tie-broken best.

    Bases are enumerated generically: each support of size <= 2 combined
    with the budget row either slack (support size 1) or active
    (support size 2), solved by Cramer's rule and filtered for
    feasibility. Returns (vertices, best_value, best_probs) with one
    (value, spend, pair, probs) tuple per vertex.
    """
    powers = np.asarray(config.powers, dtype=np.float64)
    weights = np.asarray(config.weights, dtype=np.float64)
    levels = len(powers)
    vertices = []

    # Support {n}, budget slack: x_n = 1 from the simplex row alone.
    for n in range(levels):
        x = np.zeros(levels)
        x[n] = 1.0
        if float(np.dot(x, powers)) <= config.p_avg:
            vertices.append(
                (float(np.dot(x, weights)), float(np.dot(x, powers)), (n, n), x)
            )

    # Support {i, k}, budget active: solve the 2x2 system
    #   x_i + x_k = 1,  P_i x_i + P_k x_k = p_avg  (Cramer).
    for i in range(levels):
        for k in range(i + 1, levels):
            det = powers[k] - powers[i]
            xi = (powers[k] - config.p_avg) / det
            xk = (config.p_avg - powers[i]) / det
            if xi < 0.0 or xk < 0.0:
                continue
            x = np.zeros(levels)
            x[i] = xi
            x[k] = xk
            vertices.append(
                (float(np.dot(x, weights)), float(np.dot(x, powers)), (i, k), x)
            )

    best_value, best_x = pick_best(vertices, config.num_levels)
    return vertices, best_value, tuple(float(v) for v in best_x)


def finite_diff_grad(loss_fn, arrays: list[np.ndarray], epsilon: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of loss_fn with respect to each array.

    loss_fn takes no arguments and must read the arrays in place; they
    are perturbed one coordinate at a time and restored afterwards.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_fn()
            flat[idx] = orig - epsilon
            down = loss_fn()
            flat[idx] = orig
            gf[idx] = (up - down) / (2.0 * epsilon)
        grads.append(g)
    return grads


def chi2_threshold(df: int, z: float = 3.09) -> float:
    """Approximate upper chi-square quantile via Wilson-Hilferty.

    z = 3.09 corresponds to roughly the 99.9th percentile.
    """
    t = 2.0 / (9.0 * df)
    return df * (1.0 - t + z * math.sqrt(t)) ** 3
