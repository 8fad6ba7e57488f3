"""Actor-critic jamming agent.

The actor is a softmax policy over jamming channels, the critic a scalar
state-value estimate, both two-layer tanh networks over the same encoded
state. Updates follow one-step temporal-difference learning: the TD error
acts as the advantage, scales the actor's log-likelihood gradient (ascent),
and drives the critic toward the bootstrapped target (descent on the squared
error, implemented as a semi-gradient step).
"""

from __future__ import annotations

import numpy as np

from .env import SpectrumState, one_hot
from .nets import TwoLayerNet


def encoding_length(num_channels: int) -> int:
    """Length of the encoded state vector: three one-hot channel blocks
    (previous action, sensing frequency, user frequency) plus a 3-way
    mode block."""
    return 3 * num_channels + 3


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def advantage_estimate(
    reward: float,
    next_value: float,
    value: float,
    discount: float,
    terminal: bool,
) -> float:
    """One-step TD error r + gamma * V(s') - V(s); terminal states bootstrap 0."""
    bootstrap = 0.0 if terminal else discount * next_value
    return reward + bootstrap - value


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw a one-hot action from channel probabilities via inverse CDF."""
    u = rng.random()
    cdf = np.cumsum(probs)
    channel = int(np.searchsorted(cdf, u, side="right")) + 1
    channel = min(channel, probs.shape[0])  # guard u landing on rounding slack
    return one_hot(channel, probs.shape[0])


class PolicyNetwork:
    """Softmax-in-action policy over jamming channels."""

    def __init__(self, num_channels: int, hidden: int, rng: np.random.Generator):
        self.num_channels = num_channels
        self.net = TwoLayerNet(encoding_length(num_channels), hidden, num_channels, rng)

    def probabilities(self, encoded: np.ndarray) -> np.ndarray:
        return softmax(self.net.forward(encoded))

    def greedy_channel(self, encoded: np.ndarray) -> int:
        """Most probable channel (1-based); ties go to the lowest index."""
        return int(np.argmax(self.net.forward(encoded))) + 1

    def log_prob_grads(self, encoded: np.ndarray, channel: int) -> dict:
        """Parameter gradients of log pi(channel | encoded)."""
        logits, cache = self.net.forward_cached(encoded)
        p = softmax(logits)
        grad_logits = -p
        grad_logits[channel - 1] += 1.0
        return self.net.grads(cache, grad_logits)

    def update(self, steps, lr: float):
        """Policy-gradient ascent over one trajectory.

        ``steps`` is an iterable of (encoded_state, channel, advantage); the
        update sums advantage-weighted log-likelihood gradients and applies
        them once with step size ``lr``.
        """
        total = None
        for encoded, channel, advantage in steps:
            g = self.log_prob_grads(encoded, channel)
            if total is None:
                total = {k: advantage * v for k, v in g.items()}
            else:
                for k, v in g.items():
                    total[k] += advantage * v
        if total is not None:
            self.net.apply_step(total, lr, label="policy")


class ValueNetwork:
    """Scalar state-value critic."""

    def __init__(self, num_channels: int, hidden: int, rng: np.random.Generator):
        self.net = TwoLayerNet(encoding_length(num_channels), hidden, 1, rng)

    def value(self, encoded: np.ndarray) -> float:
        return float(self.net.forward(encoded)[0])

    def update(self, encoded: np.ndarray, advantage: float, lr: float):
        """Semi-gradient TD step: w += lr * advantage * grad V(s).

        Equivalent to one descent step on the squared TD error with the
        bootstrapped target held fixed.
        """
        _, cache = self.net.forward_cached(encoded)
        grads = self.net.grads(cache, np.array([1.0]))
        self.net.apply_step(grads, lr * advantage, label="critic")


def policy_forward(policy: PolicyNetwork, state: SpectrumState) -> np.ndarray:
    """Channel probabilities for a raw spectrum state."""
    return policy.probabilities(state.encode())


def critic_update(critic: ValueNetwork, state: SpectrumState, advantage: float, lr: float):
    critic.update(state.encode(), advantage, lr)


def actor_update(policy: PolicyNetwork, steps, lr: float):
    policy.update(steps, lr)
