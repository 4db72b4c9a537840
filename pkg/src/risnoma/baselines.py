"""Non-learning phase controllers and the exhaustive-search optimum."""

from __future__ import annotations

import itertools

import numpy as np

from .numerics import make_rng
from .rlenv import PhaseConfig

MAX_ENUMERATION = 10**6


class ComplexityGuardError(ValueError):
    """Raised when an enumeration would exceed its configured size limit."""


def random_phase(env, rng, steps):
    """Fresh uniform configuration every slot; returns the per-slot sum rate."""
    rng = make_rng(rng)
    idx = rng.integers(1, env.levels, size=(steps, env.num_res))
    q = np.exp(1j * idx * np.pi / env.levels)
    return env.model.rates(q) if steps else np.zeros(0)


def fixed_phase(env, state, steps):
    """Hold ``state`` for the whole horizon."""
    return np.full(steps, env.rate(state))


def _index_chunks(num_res, levels, chunk):
    it = itertools.product(range(1, levels), repeat=num_res)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=int)


def exhaustive_search(env, limit=MAX_ENUMERATION, chunk=8192):
    """Global argmax of the sum rate over all ``(D-1)^N`` configurations.

    Configurations are visited in lexicographic (odometer) order and only a
    strictly larger rate replaces the incumbent, so ties resolve to the
    lexicographically smallest index vector.
    """
    total = (env.levels - 1) ** env.num_res
    if total > limit:
        raise ComplexityGuardError(
            f"{total} configurations exceed the enumeration limit of {limit}"
        )
    best_rate = -np.inf
    best_idx = None
    for block in _index_chunks(env.num_res, env.levels, chunk):
        rates = env.model.rates(np.exp(1j * block * np.pi / env.levels))
        j = int(np.argmax(rates))
        if rates[j] > best_rate:
            best_rate = float(rates[j])
            best_idx = block[j]
    return PhaseConfig(tuple(best_idx), env.levels), best_rate


def random_search_bound(env, rng, samples=100):
    """Best rate over ``samples`` uniform configurations (a lower bound on the optimum)."""
    return float(np.max(random_phase(env, rng, samples)))

