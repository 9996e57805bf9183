"""Small dense action-value networks with hand-written backprop.

Two function approximators over the encoded observation vector:

* PlainQNet: features -> H -> H -> one value per action.
* DuelingQNet: features -> shared H, then a state-value stream (H -> 1)
  and an advantage stream (H -> A), recombined as
      q = v + (g - mean(g))        aggregation "mean" (default)
      q = v + (g - max(g))         aggregation "max"
  Subtracting the aggregate pins the otherwise unidentifiable split
  between the two streams; in "max" mode the greedy action's q equals v.

Hidden activations are ReLU, outputs are linear, weights start
Glorot-uniform and biases at zero. Training is plain SGD on the
mean-squared error against a frozen-target bootstrap value.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PlainQNet",
    "DuelingQNet",
    "make_net",
    "td_targets",
    "loss_and_gradient",
    "sgd_step",
]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class PlainQNet:
    """Two hidden layers, one linear output per action."""

    def __init__(self, num_features: int, hidden: int, num_actions: int, rng: np.random.Generator):
        self.shape = (num_features, hidden, num_actions)
        self.w1 = _glorot(rng, num_features, hidden)
        self.b1 = np.zeros(hidden)
        self.w2 = _glorot(rng, hidden, hidden)
        self.b2 = np.zeros(hidden)
        self.w3 = _glorot(rng, hidden, num_actions)
        self.b3 = np.zeros(num_actions)

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def q_values(self, x: np.ndarray) -> np.ndarray:
        h1 = np.maximum(x @ self.w1 + self.b1, 0.0)
        h2 = np.maximum(h1 @ self.w2 + self.b2, 0.0)
        return h2 @ self.w3 + self.b3

    def forward_cache(self, x: np.ndarray):
        h1 = np.maximum(x @ self.w1 + self.b1, 0.0)
        h2 = np.maximum(h1 @ self.w2 + self.b2, 0.0)
        q = h2 @ self.w3 + self.b3
        return q, (x, h1, h2)

    def backward(self, cache, dq: np.ndarray) -> list[np.ndarray]:
        x, h1, h2 = cache
        dw3 = h2.T @ dq
        db3 = dq.sum(axis=0)
        dh2 = (dq @ self.w3.T) * (h2 > 0.0)
        dw2 = h1.T @ dh2
        db2 = dh2.sum(axis=0)
        dh1 = (dh2 @ self.w2.T) * (h1 > 0.0)
        dw1 = x.T @ dh1
        db1 = dh1.sum(axis=0)
        return [dw1, db1, dw2, db2, dw3, db3]

    def clone(self) -> "PlainQNet":
        other = object.__new__(PlainQNet)
        other.shape = self.shape
        for name, arr in zip(("w1", "b1", "w2", "b2", "w3", "b3"), self.params()):
            setattr(other, name, arr.copy())
        return other

    def load_from(self, other: "PlainQNet") -> None:
        for mine, theirs in zip(self.params(), other.params()):
            np.copyto(mine, theirs)


class DuelingQNet:
    """Shared trunk feeding separate state-value and advantage streams."""

    def __init__(
        self,
        num_features: int,
        hidden: int,
        num_actions: int,
        rng: np.random.Generator,
        agg: str = "mean",
    ):
        if agg not in ("mean", "max"):
            raise ValueError("agg must be 'mean' or 'max'")
        self.shape = (num_features, hidden, num_actions)
        self.agg = agg
        self.ws = _glorot(rng, num_features, hidden)
        self.bs = np.zeros(hidden)
        self.wv1 = _glorot(rng, hidden, hidden)
        self.bv1 = np.zeros(hidden)
        self.wv2 = _glorot(rng, hidden, 1)
        self.bv2 = np.zeros(1)
        self.wa1 = _glorot(rng, hidden, hidden)
        self.ba1 = np.zeros(hidden)
        self.wa2 = _glorot(rng, hidden, num_actions)
        self.ba2 = np.zeros(num_actions)

    _names = ("ws", "bs", "wv1", "bv1", "wv2", "bv2", "wa1", "ba1", "wa2", "ba2")

    def params(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in self._names]

    def streams(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """State values (B, 1) and raw advantages (B, A) before combining."""
        h = np.maximum(x @ self.ws + self.bs, 0.0)
        hv = np.maximum(h @ self.wv1 + self.bv1, 0.0)
        v = hv @ self.wv2 + self.bv2
        ha = np.maximum(h @ self.wa1 + self.ba1, 0.0)
        g = ha @ self.wa2 + self.ba2
        return v, g

    def combine(self, v: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.agg == "mean":
            return v + g - g.mean(axis=1, keepdims=True)
        return v + g - g.max(axis=1, keepdims=True)

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.combine(*self.streams(x))

    def forward_cache(self, x: np.ndarray):
        h = np.maximum(x @ self.ws + self.bs, 0.0)
        hv = np.maximum(h @ self.wv1 + self.bv1, 0.0)
        v = hv @ self.wv2 + self.bv2
        ha = np.maximum(h @ self.wa1 + self.ba1, 0.0)
        g = ha @ self.wa2 + self.ba2
        q = self.combine(v, g)
        return q, (x, h, hv, ha, g)

    def backward(self, cache, dq: np.ndarray) -> list[np.ndarray]:
        x, h, hv, ha, g = cache
        dsum = dq.sum(axis=1, keepdims=True)
        if self.agg == "mean":
            dg = dq - dsum / g.shape[1]
        else:
            dg = dq.copy()
            rows = np.arange(g.shape[0])
            dg[rows, g.argmax(axis=1)] -= dsum[:, 0]
        dv = dsum

        dwa2 = ha.T @ dg
        dba2 = dg.sum(axis=0)
        dha = (dg @ self.wa2.T) * (ha > 0.0)
        dwa1 = h.T @ dha
        dba1 = dha.sum(axis=0)

        dwv2 = hv.T @ dv
        dbv2 = dv.sum(axis=0)
        dhv = (dv @ self.wv2.T) * (hv > 0.0)
        dwv1 = h.T @ dhv
        dbv1 = dhv.sum(axis=0)

        dh = (dha @ self.wa1.T + dhv @ self.wv1.T) * (h > 0.0)
        dws = x.T @ dh
        dbs = dh.sum(axis=0)
        return [dws, dbs, dwv1, dbv1, dwv2, dbv2, dwa1, dba1, dwa2, dba2]

    def clone(self) -> "DuelingQNet":
        other = object.__new__(DuelingQNet)
        other.shape = self.shape
        other.agg = self.agg
        for name in self._names:
            setattr(other, name, getattr(self, name).copy())
        return other

    def load_from(self, other: "DuelingQNet") -> None:
        for mine, theirs in zip(self.params(), other.params()):
            np.copyto(mine, theirs)


def make_net(kind: str, num_features: int, hidden: int, num_actions: int,
             rng: np.random.Generator, agg: str = "mean"):
    """Factory keyed by learner kind; dueling-style kinds share one arch."""
    if kind == "deep_q":
        return PlainQNet(num_features, hidden, num_actions, rng)
    if kind in ("dueling", "htt", "wtj"):
        return DuelingQNet(num_features, hidden, num_actions, rng, agg=agg)
    raise ValueError(f"no network for kind {kind!r}")


def td_targets(target_net, rewards: np.ndarray, next_feats: np.ndarray, gamma: float) -> np.ndarray:
    """Bootstrap targets r + gamma * max_a q_target(s', a)."""
    return rewards + gamma * target_net.q_values(next_feats).max(axis=1)


def loss_and_gradient(net, feats, actions, targets):
    """Mean-squared TD error and its gradient for one mini-batch.

    actions are 0-based indices into the action-value output. Returns
    (loss, grads) with grads shaped like net.params().
    """
    q, cache = net.forward_cache(feats)
    rows = np.arange(feats.shape[0])
    err = q[rows, actions] - targets
    loss = float(np.mean(err ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / feats.shape[0]
    return loss, net.backward(cache, dq)


def sgd_step(net, grads: list[np.ndarray], lr: float) -> None:
    """theta <- theta - lr * grad, applied in place."""
    for p, g in zip(net.params(), grads):
        p -= lr * g
