"""Learning agents and scripted policies for the link simulator.

One training entry point, `train_agent`, drives a LinkEnv for a fixed
number of slots as a continuing task (no episode resets) and supports:

* "tabular": a visit-counted Q table with step size 1 / (1 + visits)^omega
* "deep_q": PlainQNet trained from a replay buffer against a frozen
  periodically synced target network
* "dueling": the same loop with the dueling architecture
* "htt", "wtj": the dueling learner constrained by a protocol mask
  (harvest-then-transmit only, or ambient-only signal exploitation)
* "fixed_ra": no learning, the scripted rate-adaptation policy, which
  reads the true jammer level instead of the detector output

Exploration is epsilon-greedy with a linear decay; greedy choice breaks
ties toward the lowest action index.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .env import (
    EnvConfig,
    EnvState,
    LinkEnv,
    Metrics,
    MetricsAccumulator,
    Observation,
    metrics_update,
    state_index,
    num_states,
)
from .nets import make_net, td_targets, loss_and_gradient, sgd_step

__all__ = [
    "TrainConfig",
    "TrainResult",
    "AGENT_KINDS",
    "num_features",
    "encode_features",
    "epsilon_at",
    "select_action",
    "QTable",
    "ReplayBuffer",
    "action_mask",
    "fixed_ra_action",
    "train_agent",
]

AGENT_KINDS = ("tabular", "deep_q", "dueling", "htt", "wtj", "fixed_ra")


def num_features(config: EnvConfig) -> int:
    """Length of the network input vector for a given capacity pair."""
    return 2 + (config.D + 1) + (config.E + 1)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared across agent kinds.

    epsilon_decay_steps defaults to a quarter of the iteration budget
    when left unset. tabular_rate_exponent is the omega in the tabular
    step size and must sit in (0.5, 1]. tabular_iterations, when set,
    gives the tabular learner a longer run than the network agents
    (it needs far more samples to cover the state grid); its epsilon
    ramp stretches to match.
    """

    iterations: int = 40_000
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay_steps: int | None = None
    batch: int = 16
    replay_capacity: int = 10_000
    target_sync: int = 1_000
    sgd_rate: float = 1e-3
    hidden: int = 16
    tabular_rate_exponent: float = 0.7
    tabular_iterations: int | None = None
    agg: str = "mean"

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.epsilon_decay_steps is not None and self.epsilon_decay_steps < 1:
            raise ValueError("epsilon_decay_steps must be positive when given")
        if self.batch < 1 or self.replay_capacity < self.batch:
            raise ValueError("need 1 <= batch <= replay_capacity")
        if self.target_sync < 1:
            raise ValueError("target_sync must be positive")
        if self.sgd_rate <= 0:
            raise ValueError("sgd_rate must be positive")
        if self.hidden < 1:
            raise ValueError("hidden must be positive")
        if not 0.5 < self.tabular_rate_exponent <= 1.0:
            raise ValueError("tabular_rate_exponent must be in (0.5, 1]")
        if self.tabular_iterations is not None and self.tabular_iterations < 1:
            raise ValueError("tabular_iterations must be positive when given")
        if self.agg not in ("mean", "max"):
            raise ValueError("agg must be 'mean' or 'max'")

    @property
    def decay_steps(self) -> int:
        return self.epsilon_decay_steps or max(1, self.iterations // 4)


def encode_features(obs: Observation, config: EnvConfig) -> np.ndarray:
    """Observation as channel/jammer bits plus one-hot queue and energy levels.

    Indicator coding keeps the discrete levels distinguishable to the
    network instead of collapsing them onto a single normalized axis.
    """
    feat = np.zeros(num_features(config))
    feat[0] = obs.c
    feat[1] = obs.j
    feat[2 + obs.d] = 1.0
    feat[2 + (config.D + 1) + obs.e] = 1.0
    return feat


def epsilon_at(iteration: int, cfg: TrainConfig) -> float:
    """Linear ramp from epsilon_start to epsilon_end over decay_steps."""
    steps = cfg.decay_steps
    if iteration >= steps:
        return cfg.epsilon_end
    frac = iteration / steps
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


def select_action(
    q_row: np.ndarray,
    eps: float,
    rng: np.random.Generator,
    mask: np.ndarray | None = None,
) -> int:
    """Epsilon-greedy pick over permitted actions, returned 1-based."""
    if mask is None:
        if eps > 0.0 and rng.random() < eps:
            return int(rng.integers(q_row.shape[0])) + 1
        return int(np.argmax(q_row)) + 1
    allowed = np.flatnonzero(mask)
    if eps > 0.0 and rng.random() < eps:
        return int(allowed[rng.integers(allowed.shape[0])]) + 1
    return int(allowed[np.argmax(q_row[allowed])]) + 1


class QTable:
    """Action values and visit counts over the flattened observation grid."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.q = np.zeros((num_states(config), config.num_actions))
        self.visits = np.zeros_like(self.q, dtype=np.int64)

    def index(self, obs: Observation) -> int:
        return state_index(obs.c, obs.j, obs.d, obs.e, self.config)

    def q_values(self, obs: Observation) -> np.ndarray:
        return self.q[self.index(obs)]

    def update(self, s: int, action: int, reward: float, s_next: int,
               gamma: float, omega: float) -> None:
        """One Q-learning backup with the visit-decayed step size."""
        a = action - 1
        tau = 1.0 / (1.0 + self.visits[s, a]) ** omega
        row = self.q[s]
        target = reward + gamma * self.q[s_next].max()
        row[a] += tau * (target - row[a])
        self.visits[s, a] += 1


class ReplayBuffer:
    """Ring buffer of transitions stored as pre-encoded feature rows."""

    def __init__(self, capacity: int, num_features: int):
        self.capacity = capacity
        self.feats = np.zeros((capacity, num_features))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_feats = np.zeros((capacity, num_features))
        self.size = 0
        self.pos = 0

    def push(self, feat: np.ndarray, action: int, reward: float, next_feat: np.ndarray) -> None:
        i = self.pos
        self.feats[i] = feat
        self.actions[i] = action - 1
        self.rewards[i] = reward
        self.next_feats[i] = next_feat
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        """Uniform over stored records, with replacement."""
        idx = rng.integers(0, self.size, batch)
        return self.feats[idx], self.actions[idx], self.rewards[idx], self.next_feats[idx]


def action_mask(kind: str, obs: Observation, num_actions: int) -> np.ndarray | None:
    """Protocol restrictions for the baseline schemes, None otherwise.

    htt: harvest-then-transmit only. No backscatter, no reduced-rate
    transmission, and harvesting only when some source is observed
    active.
    wtj: additionally to plain transmission the agent may harvest or
    backscatter, but not when the jammer is the sole active source, and
    never at a reduced rate.
    """
    if kind == "htt":
        mask = np.zeros(num_actions, dtype=bool)
        mask[0] = True
        mask[1] = True
        mask[2] = obs.c == 1 or obs.j == 1
        return mask
    if kind == "wtj":
        mask = np.zeros(num_actions, dtype=bool)
        mask[:4] = True
        if obs.c == 0 and obs.j == 1:
            mask[2] = False
            mask[3] = False
        return mask
    return None


def fixed_ra_action(state: EnvState, config: EnvConfig) -> int:
    """Scripted rate-adaptation policy with oracle access to the level.

    Jammed slots always answer with the highest-yield reduced rate for
    the observed level; an active ambient source means harvest; a fully
    clear slot transmits whenever there is data and energy for it.
    """
    n = state.level
    if n > 0:
        best = 0
        for m in range(1, len(config.rates)):
            if config.rates[m][n] > config.rates[best][n]:
                best = m
        return 5 + best
    if state.c == 1:
        return 3
    if state.d > 0 and state.e >= config.e_t:
        return 2
    return 1


@dataclass
class TrainResult:
    """What a training run hands back to the harness."""

    kind: str
    agent: object
    curve_iters: np.ndarray
    curve_reward: np.ndarray
    snapshots: list[tuple[int, Metrics]]
    accumulator: MetricsAccumulator


def train_agent(
    env: LinkEnv,
    kind: str,
    cfg: TrainConfig,
    rng: np.random.Generator,
    eval_window: int = 1000,
) -> TrainResult:
    """Run one agent for cfg.iterations slots and collect metrics.

    The reward curve holds the mean reward of each eval_window block;
    snapshots hold the cumulative metrics at each block boundary.
    """
    if kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {kind!r}")
    if kind == "fixed_ra":
        return _run_fixed_ra(env, cfg, eval_window)
    if kind == "tabular":
        return _train_tabular(env, cfg, rng, eval_window)
    return _train_deep(env, kind, cfg, rng, eval_window)


def _windows():
    return MetricsAccumulator(), [], [], []


def _record_window(i, window_sum, eval_window, acc, iters, rewards, snapshots):
    iters.append(i + 1)
    rewards.append(window_sum / eval_window)
    snapshots.append((i + 1, acc.finalize()))


def _run_fixed_ra(env: LinkEnv, cfg: TrainConfig, eval_window: int) -> TrainResult:
    acc, iters, rewards, snapshots = _windows()
    window_sum = 0.0
    for i in range(cfg.iterations):
        action = fixed_ra_action(env.state, env.config)
        out = env.step(action)
        metrics_update(acc, out, out.arrivals)
        window_sum += out.reward
        if (i + 1) % eval_window == 0:
            _record_window(i, window_sum, eval_window, acc, iters, rewards, snapshots)
            window_sum = 0.0
    return TrainResult("fixed_ra", None, np.array(iters), np.array(rewards), snapshots, acc)


def _train_tabular(env: LinkEnv, cfg: TrainConfig, rng: np.random.Generator,
                   eval_window: int) -> TrainResult:
    if cfg.tabular_iterations is not None:
        cfg = dataclasses.replace(
            cfg, iterations=cfg.tabular_iterations, tabular_iterations=None
        )
    table = QTable(env.config)
    acc, iters, rewards, snapshots = _windows()
    window_sum = 0.0
    obs = env.observe()
    s = table.index(obs)
    for i in range(cfg.iterations):
        action = select_action(table.q[s], epsilon_at(i, cfg), rng)
        out = env.step(action)
        metrics_update(acc, out, out.arrivals)
        s_next = table.index(env.observe())
        table.update(s, action, out.reward, s_next, cfg.gamma, cfg.tabular_rate_exponent)
        s = s_next
        window_sum += out.reward
        if (i + 1) % eval_window == 0:
            _record_window(i, window_sum, eval_window, acc, iters, rewards, snapshots)
            window_sum = 0.0
    return TrainResult("tabular", table, np.array(iters), np.array(rewards), snapshots, acc)


def _train_deep(env: LinkEnv, kind: str, cfg: TrainConfig, rng: np.random.Generator,
                eval_window: int) -> TrainResult:
    num_actions = env.config.num_actions
    nf = num_features(env.config)
    net = make_net(kind, nf, cfg.hidden, num_actions, rng, agg=cfg.agg)
    target = net.clone()
    replay = ReplayBuffer(cfg.replay_capacity, nf)
    masked = kind in ("htt", "wtj")

    acc, iters, rewards, snapshots = _windows()
    window_sum = 0.0
    obs = env.observe()
    feat = encode_features(obs, env.config)
    for i in range(cfg.iterations):
        mask = action_mask(kind, obs, num_actions) if masked else None
        q_row = net.q_values(feat[None, :])[0]
        action = select_action(q_row, epsilon_at(i, cfg), rng, mask)
        out = env.step(action)
        metrics_update(acc, out, out.arrivals)
        obs = env.observe()
        next_feat = encode_features(obs, env.config)
        replay.push(feat, action, out.reward, next_feat)
        feat = next_feat

        feats_b, actions_b, rewards_b, next_b = replay.sample(cfg.batch, rng)
        targets = td_targets(target, rewards_b, next_b, cfg.gamma)
        _, grads = loss_and_gradient(net, feats_b, actions_b, targets)
        sgd_step(net, grads, cfg.sgd_rate)
        if (i + 1) % cfg.target_sync == 0:
            target.load_from(net)

        window_sum += out.reward
        if (i + 1) % eval_window == 0:
            _record_window(i, window_sum, eval_window, acc, iters, rewards, snapshots)
            window_sum = 0.0
    return TrainResult(kind, net, np.array(iters), np.array(rewards), snapshots, acc)
