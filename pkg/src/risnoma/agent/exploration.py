"""Action-selection distributions and learning-rate schedules."""

from __future__ import annotations

import numpy as np

STRATEGIES = ("noise", "eps-greedy", "softmax", "exp3")
SCHEDULES = ("constant", "iteration", "step", "exponential")


class ConfigError(ValueError):
    pass


def epsilon_greedy_probs(q_values, epsilon):
    """Greedy with probability ``1 - eps``, uniform random with probability ``eps``."""
    q = np.asarray(q_values, dtype=float)
    p = np.full(q.size, epsilon / q.size)
    p[int(np.argmax(q))] += 1.0 - epsilon
    return p


def softmax_probs(q_values, temperature):
    z = np.asarray(q_values, dtype=float) / temperature
    w = np.exp(z - z.max())
    return w / w.sum()


def exp3_probs(q_values, alpha, beta):
    """``(1 - alpha) * softmax(beta * Q) + alpha / n_actions``."""
    q = np.asarray(q_values, dtype=float)
    return (1.0 - alpha) * softmax_probs(beta * q, 1.0) + alpha / q.size


def action_probabilities(strategy, q_values, epsilon=0.1, temperature=1.0, alpha=0.1, beta=1.0):
    if strategy == "eps-greedy":
        return epsilon_greedy_probs(q_values, epsilon)
    if strategy == "softmax":
        return softmax_probs(q_values, temperature)
    if strategy == "exp3":
        return exp3_probs(q_values, alpha, beta)
    raise ConfigError(f"unknown discrete exploration strategy {strategy!r}")


def lr_schedule(kind, lr0, t, decay=0.0, drop=0.5, step_drop=10):
    """Learning rate after ``t`` iterations.

    ``iteration``: ``lr0 / (1 + decay*t)``; ``step``: ``lr0 * drop**(t / step_drop)``;
    ``exponential``: ``lr0 * exp(-decay*t)``.
    """
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    if kind == "constant":
        return lr0
    if kind == "iteration":
        return lr0 / (1.0 + decay * t)
    if kind == "step":
        return lr0 * drop ** (t / step_drop)
    if kind == "exponential":
        return lr0 * np.exp(-decay * t)
    raise ConfigError(f"unknown learning-rate schedule {kind!r}")


def linear_decay(start, end, progress):
    """Linear interpolation clamped to ``progress`` in [0, 1]."""
    progress = min(max(progress, 0.0), 1.0)
    return start + (end - start) * progress
