"""Markov environment over discrete RIS phase configurations.

The state is the vector of per-element phase indices ``idx_n`` in
``{1, ..., D-1}`` with phase ``idx_n * pi / D`` and unit amplitude. An
action nudges one element up or down by one level (or does nothing); the
reward is the sum-rate improvement, floored at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import make_rng


@dataclass(frozen=True)
class PhaseConfig:
    idx: tuple
    levels: int

    def __post_init__(self):
        idx = tuple(int(i) for i in np.ravel(self.idx))
        if self.levels < 2:
            raise ValueError("phase levels D must be >= 2")
        if any(i < 1 or i > self.levels - 1 for i in idx):
            raise ValueError(f"phase indices must lie in [1, {self.levels - 1}], got {idx}")
        object.__setattr__(self, "idx", idx)

    amplitude = 1.0

    @property
    def num_res(self):
        return len(self.idx)

    def phases(self):
        return np.asarray(self.idx, dtype=float) * np.pi / self.levels

    def reflection(self):
        return self.amplitude * np.exp(1j * self.phases())


@dataclass(frozen=True)
class EnvAction:
    """Move element ``re_index`` (0-based) by ``direction``; ``None`` is a no-op."""

    re_index: int | None = None
    direction: int = 0

    def __post_init__(self):
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")

    @property
    def is_noop(self):
        return self.re_index is None or self.direction == 0


NOOP = EnvAction()


@dataclass(frozen=True)
class StepResult:
    next_state: PhaseConfig
    reward: float
    rate: float


def init_state(num_res, levels, rng):
    rng = make_rng(rng)
    return PhaseConfig(tuple(rng.integers(1, levels, size=num_res)), levels)


def apply_action(state, action):
    """Apply a single-element nudge, clamping to the admissible index range."""
    if action.is_noop:
        return state
    n = action.re_index
    if not 0 <= n < state.num_res:
        raise IndexError(f"RE index {n} out of range for {state.num_res} elements")
    idx = list(state.idx)
    idx[n] = min(max(idx[n] + action.direction, 1), state.levels - 1)
    return PhaseConfig(tuple(idx), state.levels)


def apply_directions(state, directions):
    """Multi-element variant: move every element by its own direction."""
    idx = np.clip(np.asarray(state.idx) + np.asarray(directions, dtype=int), 1, state.levels - 1)
    return PhaseConfig(tuple(idx), state.levels)


def encode_state(state):
    return np.asarray(state.idx, dtype=float) / (state.levels - 1)


def discrete_actions(num_res):
    """The ``2N + 1`` discrete actions: no-op, then ``(+1, -1)`` per element."""
    acts = [NOOP]
    for n in range(num_res):
        acts.append(EnvAction(n, 1))
        acts.append(EnvAction(n, -1))
    return acts


def action_vector(action, num_res):
    """One-hot raw vector for a discrete action (zeros for the no-op)."""
    v = np.zeros(num_res)
    if not action.is_noop:
        v[action.re_index] = action.direction
    return v


def discretize(raw, dead_zone=1.0 / 3.0):
    """Map a policy vector in ``[-1, 1]^N`` to one action.

    The element with the largest magnitude is moved in the direction of its
    sign; magnitudes inside the dead zone give a no-op.
    """
    raw = np.asarray(raw, dtype=float)
    n = int(np.argmax(np.abs(raw)))
    if abs(raw[n]) < dead_zone:
        return NOOP
    return EnvAction(n, 1 if raw[n] > 0 else -1)


class PhaseEnv:
    """Environment around a frozen :class:`~risnoma.noma.DownlinkModel`.

    Rates are memoised per state, which is exact because the channels and
    precoder are frozen for the lifetime of the environment.
    """

    def __init__(self, model, levels, multi_element=False, dead_zone=1.0 / 3.0, cache=True):
        if levels < 2:
            raise ValueError("phase levels D must be >= 2")
        self.model = model
        self.levels = int(levels)
        self.num_res = model.inst.num_res
        self.multi_element = multi_element
        self.dead_zone = dead_zone
        self._cache = {} if cache else None
        self.state = None

    def rate(self, state):
        if self._cache is None:
            return self.model.rate(state.reflection())
        r = self._cache.get(state.idx)
        if r is None:
            r = self.model.rate(state.reflection())
            self._cache[state.idx] = r
        return r

    def reset(self, rng):
        self.state = init_state(self.num_res, self.levels, rng)
        return self.state

    def transition(self, state, action):
        """Next state for an :class:`EnvAction` or a raw policy vector."""
        if isinstance(action, EnvAction):
            return apply_action(state, action)
        raw = np.asarray(action, dtype=float)
        if self.multi_element:
            dirs = np.where(np.abs(raw) >= self.dead_zone, np.sign(raw), 0)
            return apply_directions(state, dirs)
        return apply_action(state, discretize(raw, self.dead_zone))

    def step(self, state, action):
        nxt = self.transition(state, action)
        r_now = self.rate(state)
        r_next = self.rate(nxt)
        reward = r_next - r_now if r_next > r_now else 0.0
        return StepResult(nxt, reward, r_next)

    def advance(self, action):
        """Step from the held state and keep the result."""
        res = self.step(self.state, action)
        self.state = res.next_state
        return res
