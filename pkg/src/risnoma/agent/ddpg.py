"""Deep deterministic policy gradient controller for RIS phase shifts.

Four networks: the critic ``Q(s, a)``, the policy ``mu(s)`` and their
soft-updated targets. The behaviour policy is the target policy plus
Gaussian noise; its raw output is discretised by the environment into a
single-element phase nudge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ..numerics import make_rng
from ..rlenv import action_vector, discrete_actions, encode_state
from .exploration import STRATEGIES, ConfigError, action_probabilities, linear_decay, lr_schedule
from .mlp import Mlp, read_networks, write_networks
from .replay import ReplayMemory


@dataclass
class LearningCurve:
    sum_reward: list = field(default_factory=list)
    mean_rate: list = field(default_factory=list)
    final_rate: list = field(default_factory=list)

    def __len__(self):
        return len(self.sum_reward)


class DdpgAgent:
    """The four networks plus the update rules, independent of any environment."""

    def __init__(self, state_dim, action_dim, hidden=48, gamma=0.99, tau=0.005, rng=None):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        rng = make_rng(rng)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.gamma = gamma
        self.tau = tau
        self.critic = Mlp([state_dim + action_dim, hidden, 1], "linear", rng)
        self.actor = Mlp([state_dim, hidden, action_dim], "tanh", rng)
        self.target_critic = self.critic.copy()
        self.target_actor = self.actor.copy()

    def networks(self):
        return {
            "critic": self.critic,
            "actor": self.actor,
            "target_critic": self.target_critic,
            "target_actor": self.target_actor,
        }

    def q_values(self, s, a, target=False):
        net = self.target_critic if target else self.critic
        return net(np.hstack([s, a]))[:, 0]

    def q_target(self, batch):
        """``y = r + gamma * Q'(s', mu'(s'))`` from the target networks."""
        a_next = self.target_actor(batch.s_next)
        return batch.r + self.gamma * self.q_values(batch.s_next, a_next, target=True)

    def critic_update(self, batch, lr):
        """One SGD step on the mean squared Bellman error; returns the pre-update loss."""
        y = self.q_target(batch)
        q, cache = self.critic.forward(np.hstack([batch.s, batch.a]))
        err = y - q[:, 0]
        loss = float(np.mean(err**2))
        grad_q = (-2.0 / len(err)) * err[:, None]
        wg, bg, _ = self.critic.backward(cache, grad_q)
        self.critic.apply_gradients(wg, bg, -lr)
        return loss

    def policy_gradient(self, s):
        """Mean ``Q(s, mu(s))`` and its gradient w.r.t. the actor parameters."""
        a, a_cache = self.actor.forward(s)
        q, q_cache = self.critic.forward(np.hstack([s, a]))
        n = len(s)
        _, _, dq_dx = self.critic.backward(q_cache, np.full((n, 1), 1.0 / n))
        wg, bg, _ = self.actor.backward(a_cache, dq_dx[:, self.state_dim:])
        return float(q.mean()), wg, bg

    def actor_update(self, batch, lr):
        """Deterministic policy-gradient ascent step; returns the pre-update mean Q."""
        mean_q, wg, bg = self.policy_gradient(batch.s)
        self.actor.apply_gradients(wg, bg, lr)
        return mean_q

    def soft_update(self, tau=None):
        tau = self.tau if tau is None else tau
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        self.target_critic.soft_update_from(self.critic, tau)
        self.target_actor.soft_update_from(self.actor, tau)

    def policy(self, s, target=True):
        return (self.target_actor if target else self.actor)(s)

    def save(self, path):
        write_networks(path, self.networks())

    def load(self, path):
        nets = read_networks(path)
        for name in ("critic", "actor", "target_critic", "target_actor"):
            setattr(self, name, nets[name])
        return self


def episode_return(rewards, gamma):
    rewards = np.asarray(rewards, dtype=float)
    return float(np.sum(rewards * gamma ** np.arange(len(rewards))))


def advantage(q_value, v_value):
    return q_value - v_value


class DdpgPhaseController(BaseEstimator):
    """Learns RIS phase nudges on a :class:`~risnoma.rlenv.PhaseEnv`.

    ``fit(env)`` runs the full training loop; afterwards ``predict`` maps
    encoded states to raw policy vectors and ``evaluate`` reports the rate
    the greedy policy settles at.

    Parameters mirror the reference setup: learning rate 0.01, discount
    0.99, minibatch 256, replay 1000, 48 hidden units.
    """

    def __init__(self, episodes=100, steps=200, hidden_size=48, gamma=0.99, tau=0.005,
                 learning_rate=0.01, lr_schedule="constant", lr_decay=0.0, lr_drop=0.5,
                 lr_step_drop=10, batch_size=256, memory_size=1000, strategy="noise",
                 noise_start=0.5, noise_end=0.05, epsilon=0.1, temperature=1.0,
                 exp3_alpha=0.1, exp3_beta=1.0, random_state=None):
        self.episodes = episodes
        self.steps = steps
        self.hidden_size = hidden_size
        self.gamma = gamma
        self.tau = tau
        self.learning_rate = learning_rate
        self.lr_schedule = lr_schedule
        self.lr_decay = lr_decay
        self.lr_drop = lr_drop
        self.lr_step_drop = lr_step_drop
        self.batch_size = batch_size
        self.memory_size = memory_size
        self.strategy = strategy
        self.noise_start = noise_start
        self.noise_end = noise_end
        self.epsilon = epsilon
        self.temperature = temperature
        self.exp3_alpha = exp3_alpha
        self.exp3_beta = exp3_beta
        self.random_state = random_state

    def _lr(self, episode):
        return lr_schedule(self.lr_schedule, self.learning_rate, episode, decay=self.lr_decay,
                           drop=self.lr_drop, step_drop=self.lr_step_drop)

    def select_action(self, s_enc, rng, progress):
        """Return the raw action vector for encoded state ``s_enc``."""
        if self.strategy == "noise":
            sigma = linear_decay(self.noise_start, self.noise_end, progress)
            raw = self.agent_.policy(s_enc[None, :])[0] + sigma * rng.standard_normal(len(s_enc))
            return np.clip(raw, -1.0, 1.0)
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown exploration strategy {self.strategy!r}")
        q = self.agent_.q_values(np.tile(s_enc, (len(self.action_table_), 1)), self.action_table_)
        p = action_probabilities(self.strategy, q, self.epsilon, self.temperature,
                                 self.exp3_alpha, self.exp3_beta)
        return self.action_table_[rng.choice(len(p), p=p)]

    def fit(self, env, callback=None, env_for_episode=None):
        """Run the training loop on ``env``.

        ``env_for_episode(ep)``, when given, supplies a fresh environment
        for each episode (channels redrawn per episode); ``env`` then only
        fixes the dimensions.
        """
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown exploration strategy {self.strategy!r}")
        rng = make_rng(self.random_state)
        n = env.num_res
        self.agent_ = DdpgAgent(n, n, self.hidden_size, self.gamma, self.tau, rng)
        self.memory_ = ReplayMemory(self.memory_size, n, n)
        self.action_table_ = np.array([action_vector(a, n) for a in discrete_actions(n)])
        self.curve_ = LearningCurve()
        total = max(self.episodes * self.steps - 1, 1)
        t_global = 0
        for ep in range(self.episodes):
            lr = self._lr(ep)
            if env_for_episode is not None:
                env = env_for_episode(ep)
            state = env.reset(rng)
            rewards, rates = [], []
            for _ in range(self.steps):
                s_enc = encode_state(state)
                raw = self.select_action(s_enc, rng, t_global / total)
                res = env.step(state, raw)
                self.memory_.push(s_enc, raw, res.reward, encode_state(res.next_state))
                if len(self.memory_) >= self.batch_size:
                    batch = self.memory_.sample(rng, self.batch_size)
                    self.agent_.critic_update(batch, lr)
                    self.agent_.actor_update(batch, lr)
                    self.agent_.soft_update()
                rewards.append(res.reward)
                rates.append(res.rate)
                state = res.next_state
                t_global += 1
            env.state = state
            self.curve_.sum_reward.append(float(np.sum(rewards)))
            self.curve_.mean_rate.append(float(np.mean(rates)) if rates else 0.0)
            self.curve_.final_rate.append(rates[-1] if rates else 0.0)
            if callback is not None:
                callback(ep, self)
        return self

    def greedy_action(self, s_enc):
        """Noise-free action: the policy output, or the argmax-Q discrete action
        when training used one of the Q-based selection rules."""
        if self.strategy == "noise":
            return self.agent_.policy(s_enc[None, :])[0]
        q = self.agent_.q_values(np.tile(s_enc, (len(self.action_table_), 1)), self.action_table_)
        return self.action_table_[int(np.argmax(q))]

    def predict(self, states):
        states = np.atleast_2d(states)
        return np.array([self.greedy_action(s) for s in states])

    def rollout(self, env, state, steps):
        """Follow the noise-free policy; returns the visited rates."""
        rates = []
        for _ in range(steps):
            res = env.step(state, self.greedy_action(encode_state(state)))
            rates.append(res.rate)
            state = res.next_state
        return np.asarray(rates), state

    def evaluate(self, env, rng=None, episodes=5, steps=None, tail=0.25, reduce="peak"):
        """Converged rate of the greedy policy, averaged over random starts.

        Each rollout is summarised over its last ``tail`` fraction of steps:
        ``reduce="peak"`` takes the best rate visited there (the configuration
        a deployed controller would settle on when the policy ends in a short
        cycle), ``reduce="mean"`` the plain average.
        """
        if reduce not in ("peak", "mean"):
            raise ValueError(f"unknown reduction {reduce!r}")
        rng = make_rng(self.random_state if rng is None else rng)
        steps = self.steps if steps is None else steps
        keep = max(1, int(round(steps * tail)))
        vals = []
        for _ in range(episodes):
            rates, _ = self.rollout(env, env.reset(rng), steps)
            window = rates[-keep:]
            vals.append(window.max() if reduce == "peak" else window.mean())
        return float(np.mean(vals))
