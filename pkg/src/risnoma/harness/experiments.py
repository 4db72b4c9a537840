"""Desk-scale reproductions of the simulation figures.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`: one :class:`RunRecord` per seed plus the CSV
tables for that experiment. All randomness flows from per-seed streams
``make_rng([seed, stream])``, so a fixed config and seed list reproduces
every table exactly (timing columns excepted).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..agent.ddpg import DdpgPhaseController
from ..baselines import MAX_ENUMERATION, exhaustive_search, fixed_phase, random_phase
from ..channel import make_instance, user_gains_db
from ..clustering import (
    EqualSizeKMeans,
    MomaClusterer,
    mismatch_count,
    normalize_features,
    oracle_matching,
    pairing_from_labels,
    well_separated_pairs,
)
from ..noma import DownlinkModel, PowerAllocation
from ..numerics import make_rng
from ..rlenv import PhaseEnv
from .config import ExperimentConfig

# independent random streams per seed
STREAM_INSTANCE = 0
STREAM_CLUSTER = 1
STREAM_AGENT = 2
STREAM_BASELINE = 3
STREAM_EVAL = 4
STREAM_FIXED = 5
STREAM_CHANNEL = 6

CURVE_HEADER = ("experiment", "seed", "episode", "sum_reward", "sum_rate")
SWEEP_HEADER = ("experiment", "scheme", "num_res", "pt_dbm", "mean_rate", "ci95")
CLUSTER_HEADER = ("seed", "iteration", "mismatches")
TIMING_HEADER = ("scheme", "steps", "seconds")
SCALING_HEADER = ("num_pairs", "seed", "moma_queries", "moma_converged", "kmeans_distance_evals",
                  "kmeans_iterations")


def stream(seed, key):
    return make_rng([int(seed), int(key)])


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)


@dataclass
class RunRecord:
    """Everything measured for one (experiment, seed) cell."""

    experiment: str
    seed: int
    metrics: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    experiment: str
    records: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def record(self, seed):
        for r in self.records:
            if r.seed == seed:
                return r
        raise KeyError(seed)


def mean_ci95(values):
    """Arithmetic mean and the half-width of a 95% normal interval."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(1.96 * v.std(ddof=1) / np.sqrt(v.size))


# -- building blocks -----------------------------------------------------------


def cluster_pairing(cfg, inst, seed):
    """Beam pairing for ``inst`` chosen by the configured clustering rule."""
    if cfg.pairing == "distance":
        return np.arange(inst.num_antennas)
    feats = normalize_features(inst.positions, user_gains_db(inst))
    if cfg.pairing == "oracle":
        labels = oracle_matching(feats, inst.groups)
    else:
        est = MomaClusterer(depth=cfg.moma_depth, max_queries=cfg.moma_max_queries,
                            temperature=cfg.moma_temperature,
                            convergence_window=cfg.moma_window,
                            random_state=stream(seed, STREAM_CLUSTER))
        labels = est.fit(feats, inst.groups).labels_
    return pairing_from_labels(labels, inst.good_users, inst.poor_users)


def build_instance(cfg, seed, num_res=None, redraw=None):
    """Frozen network instance for ``seed`` with a clustered beam pairing.

    User positions depend on the seed only, so sweeps over ``num_res``
    share the geometry. ``redraw`` selects an extra channel realisation.
    """
    net = cfg.network(num_res=cfg.num_res if num_res is None else num_res)
    rng = stream(seed, STREAM_INSTANCE) if redraw is None else make_rng(
        [int(seed), STREAM_CHANNEL, int(redraw)])
    inst = make_instance(net, rng)
    return inst.with_pairing(cluster_pairing(cfg, inst, seed))


def build_env(cfg, inst, levels=None, pt_dbm=None, scheme="noma"):
    net = cfg.network(num_res=inst.num_res,
                      tx_power_dbm=cfg.tx_power_dbm if pt_dbm is None else pt_dbm)
    alloc = PowerAllocation.fixed(inst.num_antennas, cfg.alpha_good, cfg.alpha_poor)
    model = DownlinkModel(inst, alloc, rho=net.cluster_power_w, scheme=scheme)
    return PhaseEnv(model, cfg.phase_levels if levels is None else levels)


def train_agent(cfg, seed, env, inst=None, levels=None):
    """Fit a DDPG controller on ``env`` (or on per-episode channel redraws)."""
    ctl = DdpgPhaseController(random_state=stream(seed, STREAM_AGENT), **cfg.agent_params())
    env_for_episode = None
    if cfg.channel_mode == "episode":
        levels = env.levels if levels is None else levels
        rho_dbm = cfg.tx_power_dbm

        def env_for_episode(ep):
            fresh = build_instance(cfg, seed, inst.num_res, redraw=ep)
            return build_env(cfg, fresh, levels, rho_dbm, env.model.scheme)

    return ctl.fit(env, env_for_episode=env_for_episode)


def converged_rates(cfg, ctl, env, seed):
    """(peak, mean) of the greedy rollout tail, averaged over evaluation starts."""
    peak = ctl.evaluate(env, rng=stream(seed, STREAM_EVAL), episodes=cfg.eval_episodes,
                        tail=cfg.eval_tail, reduce="peak")
    mean = ctl.evaluate(env, rng=stream(seed, STREAM_EVAL), episodes=cfg.eval_episodes,
                        tail=cfg.eval_tail, reduce="mean")
    return peak, mean


def random_mean(cfg, env, seed):
    return float(random_phase(env, stream(seed, STREAM_BASELINE), cfg.random_slots).mean())


def fixed_rate(cfg, env, seed):
    state = env.reset(stream(seed, STREAM_FIXED))
    return float(fixed_phase(env, state, 1)[0])


def optimal_rate(env):
    if (env.levels - 1) ** env.num_res > MAX_ENUMERATION:
        return None
    return exhaustive_search(env)[1]


def curve_rows(name, seed, curve):
    return [(name, seed, ep, curve.sum_reward[ep], curve.mean_rate[ep]) for ep in range(len(curve))]


def sweep_rows(name, per_key):
    """Seed-average ``{(scheme, num_res, pt): [values]}`` into sweep rows."""
    rows = []
    for (scheme, n, pt), vals in per_key.items():
        m, ci = mean_ci95(vals)
        rows.append((name, scheme, n, pt, m, ci))
    return rows


# -- experiments ---------------------------------------------------------------


def run_fig3(cfg):
    """MOMA mismatch count after every query, one series per seed."""
    res = ExperimentResult("fig3", tables={"fig3": Table(CLUSTER_HEADER)})
    for seed in cfg.seeds:
        if cfg.cluster_instances == "separated":
            feats, groups, _ = well_separated_pairs(cfg.cluster_pairs, stream(seed, STREAM_INSTANCE),
                                                    ratio=cfg.separation_ratio)
        else:
            inst = make_instance(cfg.network(num_antennas=cfg.cluster_pairs),
                                 stream(seed, STREAM_INSTANCE))
            feats, groups = normalize_features(inst.positions, user_gains_db(inst)), inst.groups
        reference = oracle_matching(feats, groups)
        est = MomaClusterer(depth=cfg.moma_depth, max_queries=cfg.moma_max_queries,
                            temperature=cfg.moma_temperature, convergence_window=cfg.moma_window,
                            random_state=stream(seed, STREAM_CLUSTER))
        est.fit(feats, groups, reference_labels=reference)
        hist = est.mismatch_history_
        res.tables["fig3"].rows += [(seed, t, int(m)) for t, m in enumerate(hist)]
        res.records.append(RunRecord("fig3", seed, {"mismatches": hist.tolist()},
                                     {"queries": est.n_queries_, "converged": est.converged_,
                                      "final_mismatches": int(hist[-1])}))
    return res


def run_table3(cfg):
    """Work to converge vs user count: MOMA queries and k-means distance evaluations."""
    res = ExperimentResult("table3", tables={"table3": Table(SCALING_HEADER)})
    for seed in cfg.seeds:
        rec = RunRecord("table3", seed)
        for k in cfg.pairs_sweep:
            rng = make_rng([int(seed), STREAM_INSTANCE, int(k)])
            feats, groups, labels = well_separated_pairs(k, rng, ratio=cfg.separation_ratio)
            est = MomaClusterer(depth=cfg.moma_depth, max_queries=cfg.moma_max_queries,
                                temperature=cfg.moma_temperature,
                                convergence_window=cfg.moma_window,
                                random_state=make_rng([int(seed), STREAM_CLUSTER, int(k)]))
            est.fit(feats, groups)
            km = EqualSizeKMeans(n_clusters=k, random_state=make_rng([int(seed), STREAM_BASELINE, int(k)]))
            km.fit(feats)
            rec.final[k] = {"queries": est.n_queries_, "converged": est.converged_,
                            "mismatches": mismatch_count(est.labels_, labels)}
            res.tables["table3"].rows.append((k, seed, est.n_queries_, int(est.converged_),
                                              km.n_distance_evals_, km.n_iter_))
        res.records.append(rec)
    return res


def run_fig4(cfg):
    """Learning curves for each phase granularity ``D`` at the configured N."""
    res = ExperimentResult("fig4", tables={"fig4": Table(CURVE_HEADER),
                                           "fig4_summary": Table(SWEEP_HEADER)})
    finals = {}
    for seed in cfg.seeds:
        inst = build_instance(cfg, seed)
        rec = RunRecord("fig4", seed)
        for d in cfg.levels_sweep:
            env = build_env(cfg, inst, levels=d)
            ctl = train_agent(cfg, seed, env, inst, levels=d)
            peak, mean = converged_rates(cfg, ctl, env, seed)
            tail = max(1, len(ctl.curve_) // 10)
            reward = float(np.mean(ctl.curve_.sum_reward[-tail:])) if len(ctl.curve_) else 0.0
            res.tables["fig4"].rows += curve_rows(f"fig4-D{d}", seed, ctl.curve_)
            rec.metrics[d] = {"sum_reward": list(ctl.curve_.sum_reward),
                              "sum_rate": list(ctl.curve_.mean_rate)}
            rec.final[d] = {"ddpg": peak, "ddpg_mean": mean, "sum_reward": reward}
            finals.setdefault((f"ddpg-D{d}", inst.num_res, cfg.tx_power_dbm), []).append(peak)
            finals.setdefault((f"reward-D{d}", inst.num_res, cfg.tx_power_dbm), []).append(reward)
        res.records.append(rec)
    res.tables["fig4_summary"].rows = sweep_rows("fig4", finals)
    return res


def _power_sweep(cfg, name, schemes_for):
    """Shared loop for the rate-vs-power figures.

    ``schemes_for(seed, inst)`` returns ``{scheme: f(pt_dbm) -> rate}``.
    """
    res = ExperimentResult(name, tables={name: Table(SWEEP_HEADER)})
    per_key = {}
    for seed in cfg.seeds:
        rec = RunRecord(name, seed)
        for n in cfg.res_sweep:
            inst = build_instance(cfg, seed, num_res=n)
            for scheme, fn in schemes_for(seed, inst, rec).items():
                for pt in cfg.power_sweep:
                    value = fn(pt)
                    if value is None:
                        continue
                    rec.final[(scheme, n, pt)] = value
                    per_key.setdefault((scheme, n, pt), []).append(value)
        res.records.append(rec)
    res.tables[name].rows = sweep_rows(name, per_key)
    return res


def run_fig5(cfg):
    """DDPG, random and optimal phases vs transmit power for each RE count.

    The agent is trained once per (seed, N) at the reference power and its
    greedy policy is then evaluated at every power level.
    """

    def schemes(seed, inst, rec):
        ctl = train_agent(cfg, seed, build_env(cfg, inst), inst)
        rec.metrics[inst.num_res] = {"sum_reward": list(ctl.curve_.sum_reward),
                                     "sum_rate": list(ctl.curve_.mean_rate)}
        enum_ok = (cfg.phase_levels - 1) ** inst.num_res <= MAX_ENUMERATION
        return {
            "ddpg": lambda pt: converged_rates(cfg, ctl, build_env(cfg, inst, pt_dbm=pt), seed)[0],
            "random": lambda pt: random_mean(cfg, build_env(cfg, inst, pt_dbm=pt), seed),
            "optimal": lambda pt: optimal_rate(build_env(cfg, inst, pt_dbm=pt)) if enum_ok else None,
        }

    return _power_sweep(cfg, "fig5", schemes)


def run_fig6(cfg):
    """NOMA vs OMA at the best (exhaustive) and random phases, per RE count."""

    def schemes(seed, inst, rec):
        out = {}
        for access in ("noma", "oma"):
            out[f"{access}-optimal"] = (
                lambda pt, a=access: optimal_rate(build_env(cfg, inst, pt_dbm=pt, scheme=a)))
            out[f"{access}-random"] = (
                lambda pt, a=access: random_mean(cfg, build_env(cfg, inst, pt_dbm=pt, scheme=a), seed))
        return out

    return _power_sweep(cfg, "fig6", schemes)


def run_fig7(cfg):
    """DDPG vs random vs fixed phases at the configured N, with learning curves."""
    res = ExperimentResult("fig7", tables={"fig7_curves": Table(CURVE_HEADER),
                                           "fig7": Table(SWEEP_HEADER)})
    per_key = {}
    for seed in cfg.seeds:
        inst = build_instance(cfg, seed)
        ctl = train_agent(cfg, seed, build_env(cfg, inst), inst)
        res.tables["fig7_curves"].rows += curve_rows("fig7", seed, ctl.curve_)
        rec = RunRecord("fig7", seed, {"sum_reward": list(ctl.curve_.sum_reward),
                                       "sum_rate": list(ctl.curve_.mean_rate)})
        for pt in cfg.power_sweep:
            env = build_env(cfg, inst, pt_dbm=pt)
            peak, mean = converged_rates(cfg, ctl, env, seed)
            vals = {"ddpg": peak, "ddpg-mean": mean, "random": random_mean(cfg, env, seed),
                    "fixed": fixed_rate(cfg, env, seed)}
            rec.final[pt] = vals
            for scheme, v in vals.items():
                per_key.setdefault((scheme, inst.num_res, pt), []).append(v)
        ref = build_env(cfg, inst)
        rec.final["reference"] = {
            "ddpg": converged_rates(cfg, ctl, ref, seed)[0],
            "random": random_mean(cfg, ref, seed),
            "fixed": fixed_rate(cfg, ref, seed),
        }
        res.records.append(rec)
    res.tables["fig7"].rows = sweep_rows("fig7", per_key)
    return res


def run_fig8(cfg):
    """Training wall-clock for NOMA and OMA environments vs step count.

    The two schemes are timed alternately on the same instance so slow
    drifts of the machine affect both equally. Seconds are seed-averaged.
    """
    res = ExperimentResult("fig8", tables={"fig8": Table(TIMING_HEADER)})
    totals = {}
    for seed in cfg.seeds:
        inst = build_instance(cfg, seed)
        rec = RunRecord("fig8", seed)
        for steps in cfg.steps_sweep:
            for scheme in ("noma", "oma"):
                env = build_env(cfg, inst, scheme=scheme)
                params = cfg.agent_params() | {"episodes": 1, "steps": int(steps)}
                ctl = DdpgPhaseController(random_state=stream(seed, STREAM_AGENT), **params)
                t0 = time.perf_counter()
                ctl.fit(env)
                dt = time.perf_counter() - t0
                rec.final[(scheme, steps)] = dt
                rec.metrics.setdefault(scheme, []).append(dt / steps)
                totals.setdefault((scheme, steps), []).append(dt)
        res.records.append(rec)
    res.tables["fig8"].rows = [(s, n, float(np.mean(v))) for (s, n), v in totals.items()]
    return res


RUNNERS = {
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "fig7": run_fig7,
    "fig8": run_fig8,
    "table3": run_table3,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)
