"""Experiment configuration: defaults, flat ``key=value`` files and overrides.

Every field has a default matching the reference simulation table, so an
empty file yields the reference setup. Files hold one ``key = value`` per
line; ``#`` starts a comment. Tuple-valued keys take comma-separated
lists (``seeds = 1,2,3``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from ..agent.exploration import SCHEDULES, STRATEGIES
from ..channel import NetworkConfig


class ConfigError(ValueError):
    """Bad configuration input; the message names the offending key."""

    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


EXPERIMENTS = {
    "fig3": "MOMA clustering: mismatches against the optimal pairing per query",
    "fig4": "DDPG learning curves for each phase granularity D",
    "fig5": "sum rate vs transmit power for DDPG, random and optimal phases across RE counts",
    "fig6": "NOMA vs OMA sum rate vs transmit power across RE counts",
    "fig7": "DDPG vs random vs fixed phases vs transmit power, with learning curves",
    "fig8": "wall-clock time vs training steps for NOMA and OMA",
    "table3": "queries to convergence of MOMA vs k-means work as the user count grows",
}
ALIASES = {"fig9": "fig8"}

_NETWORK_FIELDS = {f.name for f in fields(NetworkConfig)} - {"ris_position"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "fig7"
    seeds: tuple = tuple(range(1, 11))

    # network (reference table)
    num_antennas: int = 4
    num_res: int = 9
    bandwidth_hz: float = 20e6
    tx_power_dbm: float = 20.0
    noise_power_dbm: float = -138.0
    side_length_m: float = 500.0
    phase_levels: int = 4
    pathloss_exp_au: float = 3.5
    pathloss_exp_ar: float = 2.2
    pathloss_exp_ru: float = 2.2
    reference_distance_m: float = 1.0
    reference_gain: float = 1.0
    alpha_good: float = 0.2
    alpha_poor: float = 0.8

    # agent (reference table)
    gamma: float = 0.99
    epsilon: float = 0.1
    learning_rate: float = 0.01
    batch_size: int = 256
    memory_size: int = 1000
    hidden_size: int = 48
    tau: float = 0.005
    strategy: str = "eps-greedy"
    lr_schedule: str = "constant"
    lr_decay: float = 0.0
    lr_drop: float = 0.5
    lr_step_drop: int = 10
    noise_start: float = 0.5
    noise_end: float = 0.05
    temperature: float = 1.0
    exp3_alpha: float = 0.1
    exp3_beta: float = 1.0

    # training and evaluation
    episodes: int = 50
    steps: int = 200
    channel_mode: str = "frozen"
    eval_episodes: int = 5
    eval_tail: float = 0.25
    random_slots: int = 1000
    pairing: str = "moma"

    # sweeps
    levels_sweep: tuple = (2, 4, 8)
    power_sweep: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    res_sweep: tuple = (4, 9, 16)
    steps_sweep: tuple = (200, 400, 800)
    pairs_sweep: tuple = (2, 4, 8, 16)

    # clustering
    cluster_pairs: int = 4
    cluster_instances: str = "separated"
    separation_ratio: float = 3.0
    moma_depth: int = 10
    moma_max_queries: int = 2000
    moma_temperature: float = 0.2
    moma_window: int = 50

    def __post_init__(self):
        _validate(self)

    def network(self, **changes):
        """The :class:`NetworkConfig` described by this config."""
        kw = {name: getattr(self, name) for name in _NETWORK_FIELDS}
        kw.update(changes)
        return NetworkConfig(**kw)

    def agent_params(self):
        """Keyword arguments for :class:`~risnoma.agent.ddpg.DdpgPhaseController`."""
        names = ("gamma", "tau", "learning_rate", "lr_schedule", "lr_decay", "lr_drop",
                 "lr_step_drop", "batch_size", "memory_size", "strategy", "noise_start",
                 "noise_end", "epsilon", "temperature", "exp3_alpha", "exp3_beta", "episodes",
                 "steps")
        kw = {n: getattr(self, n) for n in names}
        kw["hidden_size"] = self.hidden_size
        return kw

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        """Round-trippable ``key = value`` dump."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


_CHOICES = {
    "strategy": STRATEGIES,
    "lr_schedule": SCHEDULES,
    "channel_mode": ("frozen", "episode"),
    "pairing": ("moma", "oracle", "distance"),
    "cluster_instances": ("separated", "network"),
}
_POSITIVE_INT = ("num_antennas", "num_res", "batch_size", "memory_size", "hidden_size", "steps",
                 "eval_episodes", "random_slots", "cluster_pairs", "moma_max_queries",
                 "moma_window", "lr_step_drop")
_NON_NEGATIVE = ("episodes", "side_length_m", "reference_gain", "learning_rate", "lr_decay",
                 "noise_start", "noise_end", "bandwidth_hz")
_UNIT_INTERVAL = ("gamma", "epsilon", "tau", "exp3_alpha", "alpha_good", "alpha_poor",
                  "eval_tail", "lr_drop")


def _validate(cfg):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {cfg.experiment!r}")
    if not cfg.seeds:
        raise ConfigError("seeds", "at least one seed is required")
    for key, choices in _CHOICES.items():
        if getattr(cfg, key) not in choices:
            raise ConfigError(key, f"must be one of {', '.join(choices)}")
    for key in _POSITIVE_INT:
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be a positive integer")
    for key in _NON_NEGATIVE:
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be non-negative")
    for key in _UNIT_INTERVAL:
        if not 0.0 <= getattr(cfg, key) <= 1.0:
            raise ConfigError(key, "must lie in [0, 1]")
    if abs(cfg.alpha_good + cfg.alpha_poor - 1.0) > 1e-9:
        raise ConfigError("alpha_poor", "alpha_good + alpha_poor must equal 1")
    if cfg.phase_levels < 2:
        raise ConfigError("phase_levels", "D must be >= 2")
    if any(d < 2 for d in cfg.levels_sweep):
        raise ConfigError("levels_sweep", "every D must be >= 2")
    if cfg.moma_depth < 2:
        raise ConfigError("moma_depth", "automaton depth must be >= 2")
    if cfg.temperature <= 0 or cfg.moma_temperature <= 0:
        raise ConfigError("temperature", "temperatures must be positive")
    if cfg.separation_ratio <= 0:
        raise ConfigError("separation_ratio", "must be positive")
    for key in ("res_sweep", "steps_sweep", "pairs_sweep"):
        if not getattr(cfg, key) or any(v < 1 for v in getattr(cfg, key)):
            raise ConfigError(key, "entries must be positive")


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _element_type(name):
    default = _FIELD_TYPES[name].default
    if isinstance(default, tuple):
        return type(default[0])
    return type(default)


def _scalar(kind, text):
    if kind is int:
        value = float(text)
        if value != int(value):
            raise ValueError("not an integer")
        return int(value)
    if kind is float:
        return float(text)
    return text


def parse_value(key, text):
    """Convert the string ``text`` to the type of field ``key``."""
    if key not in _FIELD_TYPES:
        raise ConfigError(key, "unknown key")
    text = text.strip()
    kind = _element_type(key)
    try:
        if isinstance(_FIELD_TYPES[key].default, tuple):
            return tuple(_scalar(kind, p.strip()) for p in text.split(",") if p.strip())
        return _scalar(kind, text)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {text!r}: {exc}") from None


def parse_assignments(lines, source="<input>"):
    """``key = value`` lines to a dict of parsed values."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def load_config(path=None, overrides=(), **changes):
    """Build an :class:`ExperimentConfig` from defaults, a file and overrides.

    ``overrides`` are ``"key=value"`` strings applied after the file;
    ``changes`` are already-typed values applied last.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_assignments(fh, str(path)))
    values.update(parse_assignments(overrides, "--set"))
    values.update(changes)
    if "experiment" in values:
        values["experiment"] = ALIASES.get(values["experiment"], values["experiment"])
    return ExperimentConfig(**values)
