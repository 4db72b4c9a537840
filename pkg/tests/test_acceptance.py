"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``; the PASS/FAIL lines are collected
into an "acceptance criteria" section of the pytest summary.
The slow learning criteria are marked ``slow``; deselect them with
``-m "not slow"``.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import VERDICTS
from oracles import loop_sinr_good, loop_sinr_poor, random_instance
from risnoma.agent.exploration import epsilon_greedy_probs, exp3_probs, softmax_probs
from risnoma.agent.mlp import Mlp
from risnoma.agent.vfa import least_squares_optimum, sgd_vfa, stability_threshold
from risnoma.channel import NetworkConfig, make_instance
from risnoma.harness.config import ExperimentConfig
from risnoma.harness.experiments import run_experiment
from risnoma.noma import DownlinkModel, PowerAllocation, sum_rate, zf_precode
from risnoma.numerics import make_rng
from risnoma.rlenv import PhaseConfig, PhaseEnv

TEN_SEEDS = tuple(range(1, 11))


def report(number, ok, detail, started, budget):
    """Print the criterion's verdict line and fail the test when it is red."""
    elapsed = time.perf_counter() - started
    in_time = elapsed < budget
    verdict = "PASS" if ok and in_time else "FAIL"
    line = f"{verdict} criterion {number}: {detail} [{elapsed:.1f} s, budget {budget:.0f} s]"
    VERDICTS.append(line)
    print(line)
    assert ok, line
    assert in_time, line


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


# -- 1. zero forcing -----------------------------------------------------------


def test_criterion_01_zero_forcing():
    t0 = time.perf_counter()
    rng = make_rng(101)
    worst = 0.0
    for _ in range(1000):
        h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        worst = max(worst, np.max(np.abs(h @ zf_precode(h) - np.eye(4))))
    report(1, worst < 1e-9, f"max |HP - I| over 1000 draws = {worst:.2e} (< 1e-9)", t0, 1.0)


# -- 2. SINR oracle ------------------------------------------------------------


def test_criterion_02_sinr_oracle():
    t0 = time.perf_counter()
    rng = make_rng(102)
    worst = 0.0
    for _ in range(1000):
        inst = random_instance(rng, pairing=rng.permutation(4))
        p = zf_precode(inst.h_au)
        q = PhaseConfig(tuple(rng.integers(1, 4, 9)), 4)
        a = rng.uniform(0.0, 0.5, 4)
        alloc = PowerAllocation(np.column_stack([a, 1 - a]))
        rho = rng.uniform(0.1, 10.0)
        rep = sum_rate(inst, q, p, alloc, rho)
        refl = q.reflection()
        ref_g = [loop_sinr_good(inst, p, alloc.good, rho, k) for k in range(4)]
        ref_p = [loop_sinr_poor(inst, refl, p, alloc.good, alloc.poor, rho, k) for k in range(4)]
        worst = max(worst, rel_err(rep.sinr_good, ref_g).max(), rel_err(rep.sinr_poor, ref_p).max())
    report(2, worst < 1e-12, f"max relative SINR error over 1000 instances = {worst:.2e} (< 1e-12)",
           t0, 5.0)


# -- 3. MOMA convergence -------------------------------------------------------


def test_criterion_03_moma_convergence():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="fig3", seeds=tuple(range(1, 101)), cluster_pairs=4,
                           moma_max_queries=2000)
    res = run_experiment(cfg)
    finals = [rec.final["final_mismatches"] for rec in res.records]
    solved = sum(m == 0 for m in finals)
    # pad each series with its final value up to the query budget, then average
    series = np.array([np.pad(h := np.asarray(rec.metrics["mismatches"], float),
                              (0, 2001 - h.size), mode="edge") for rec in res.records])
    smooth = np.convolve(series.mean(axis=0), np.ones(50) / 50, mode="valid")
    rises = np.diff(smooth).max()
    ok = solved >= 95 and rises <= 1e-12
    report(3, ok, f"{solved}/100 seeds reach 0 mismatches (need >= 95); largest rise of the "
           f"smoothed mean series = {rises:.2e} (need <= 1e-12)", t0, 10.0)


# -- 4. MOMA linear scaling ----------------------------------------------------


def r_squared(y, fit):
    return 1.0 - np.sum((y - fit) ** 2) / np.sum((y - y.mean()) ** 2)


def test_criterion_04_moma_linear():
    t0 = time.perf_counter()
    ks = (2, 4, 8, 16)
    cfg = ExperimentConfig(experiment="table3", seeds=tuple(range(1, 21)), pairs_sweep=ks)
    res = run_experiment(cfg)
    queries = {k: [] for k in ks}
    for row in res.tables["table3"].rows:
        queries[row[0]].append(row[2])
    x = np.array(ks, float)
    y = np.array([np.mean(queries[k]) for k in ks])
    lin = np.polyval(np.polyfit(x, y, 1), x)
    c = np.sum(y * x**2) / np.sum(x**4)
    quad = c * x**2
    r2_lin, r2_quad = r_squared(y, lin), r_squared(y, quad)
    ok = r2_lin >= 0.9 and r2_lin > r2_quad
    means = ", ".join(f"K={k}: {v:.1f}" for k, v in zip(ks, y))
    report(4, ok, f"mean queries {means}; linear R^2 = {r2_lin:.3f} (need >= 0.9), "
           f"quadratic-only R^2 = {r2_quad:.3f}", t0, 30.0)


# -- 5. near-optimality --------------------------------------------------------


@pytest.mark.slow
def test_criterion_05_near_optimal():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="fig5", seeds=TEN_SEEDS, num_res=4, res_sweep=(4,),
                           power_sweep=(20.0,), phase_levels=4)
    res = run_experiment(cfg)
    ratios = [rec.final[("ddpg", 4, 20.0)] / rec.final[("optimal", 4, 20.0)] for rec in res.records]
    hits = sum(r >= 0.9 for r in ratios)
    report(5, hits >= 7, f"{hits}/10 seeds at >= 90% of the exhaustive optimum (need >= 7); "
           f"ratios {min(ratios):.4f}..{max(ratios):.4f} after {cfg.episodes} episodes", t0, 300.0)


# -- 6. NOMA beats OMA ---------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_noma_beats_oma():
    t0 = time.perf_counter()
    powers = (10.0, 15.0, 20.0, 25.0, 30.0)
    cfg = ExperimentConfig(experiment="fig6", seeds=TEN_SEEDS, res_sweep=(9,), power_sweep=powers)
    res = run_experiment(cfg)
    rate = {(r[1], r[3]): r[4] for r in res.tables["fig6"].rows}
    gaps = np.array([rate[("noma-optimal", pt)] - rate[("oma-optimal", pt)] for pt in powers])
    ok = bool(np.all(gaps > 0) and np.all(np.diff(gaps) >= 0))
    report(6, ok, "NOMA - OMA gap at Pt 10..30 dBm = " + ", ".join(f"{g:.3f}" for g in gaps)
           + " (need > 0 and non-decreasing)", t0, 600.0)


# -- 7. DDPG beats random ------------------------------------------------------


@pytest.mark.slow
def test_criterion_07_ddpg_beats_random():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="fig7", seeds=TEN_SEEDS, num_res=9, phase_levels=4,
                           power_sweep=(20.0,))
    res = run_experiment(cfg)
    fin = [rec.final["reference"] for rec in res.records]
    bad = sum(f["ddpg"] <= f["random"] for f in fin)
    bad_fixed = sum(f["random"] <= f["fixed"] for f in fin)
    gaps = [f["ddpg"] - f["random"] for f in fin]
    report(7, bad <= 2, f"DDPG <= random mean in {bad}/10 seeds (allowed <= 2); "
           f"DDPG - random gaps " + " ".join(f"{g:+.3f}" for g in gaps)
           + f"; random <= fixed in {bad_fixed}/10 seeds", t0, 600.0)


# -- 8. granularity ------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_granularity():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="fig4", seeds=TEN_SEEDS, num_res=4, levels_sweep=(2, 4, 8))
    res = run_experiment(cfg)
    rows = {r[1]: (r[4], r[5]) for r in res.tables["fig4_summary"].rows}
    means = [rows[f"ddpg-D{d}"][0] for d in (2, 4, 8)]
    ok = means[2] >= means[1] >= means[0]
    detail = ", ".join(f"D={d}: {rows[f'ddpg-D{d}'][0]:.3f} +/- {rows[f'ddpg-D{d}'][1]:.3f}"
                       for d in (2, 4, 8))
    rewards = ", ".join(f"D={d}: {rows[f'reward-D{d}'][0]:.3f}" for d in (2, 4, 8))
    report(8, ok, f"converged rate {detail} (need D8 >= D4 >= D2); tail episode reward {rewards}",
           t0, 600.0)


# -- 9. RE count ---------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_re_count():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(experiment="fig7", seeds=TEN_SEEDS, power_sweep=(20.0,))
    means = {}
    for n in (4, 9, 16):
        res = run_experiment(cfg.replace(num_res=n))
        means[n] = np.mean([rec.final["reference"]["ddpg"] for rec in res.records])
    ok = means[16] > means[9] > means[4]
    report(9, ok, "converged DDPG rate " + ", ".join(f"N={n}: {v:.3f}" for n, v in means.items())
           + " (need N16 > N9 > N4)", t0, 900.0)


# -- 10. gradients -------------------------------------------------------------


def test_criterion_10_gradients():
    t0 = time.perf_counter()
    rng = make_rng(110)
    worst = 0.0
    h = 1e-6
    for probe in range(100):
        sizes = [int(rng.integers(1, 10)), int(rng.integers(1, 49)), int(rng.integers(1, 10))]
        net = Mlp(sizes, "tanh" if probe % 2 else "linear", rng=rng)
        x = rng.standard_normal((3, sizes[0]))
        g_out = rng.standard_normal((3, sizes[-1]))
        _, cache = net.forward(x)
        wg, bg, _ = net.backward(cache, g_out)
        analytic = np.concatenate([g.ravel() for g in wg + bg])
        theta = net.get_flat()
        numeric = np.empty_like(theta)
        for j in range(theta.size):
            step = np.zeros_like(theta)
            step[j] = h
            net.set_flat(theta + step)
            fp = np.sum(net(x) * g_out)
            net.set_flat(theta - step)
            fm = np.sum(net(x) * g_out)
            numeric[j] = (fp - fm) / (2 * h)
        net.set_flat(theta)
        worst = max(worst, np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12))
    report(10, worst < 1e-4, f"max gradient error relative to each probe's gradient scale = "
           f"{worst:.2e} over 100 probes (< 1e-4)", t0, 10.0)


# -- 11. VFA convergence -------------------------------------------------------


def test_criterion_11_vfa():
    t0 = time.perf_counter()
    rng = make_rng(111)
    worst_rise, worst_final = -np.inf, 0.0
    for _ in range(20):
        d = int(rng.integers(1, 11))
        phi = rng.standard_normal((int(rng.integers(d + 5, 60)), d))
        values = phi @ rng.standard_normal(d)
        w_star = least_squares_optimum(phi, values)
        alpha = rng.uniform(0.2, 0.95) * stability_threshold(phi)
        traj = sgd_vfa(phi, values, alpha, 5000)
        dist = np.linalg.norm(traj - w_star, axis=1)
        worst_rise = max(worst_rise, np.diff(dist).max())
        worst_final = max(worst_final, dist[-1])
    ok = worst_rise <= 1e-12 and worst_final < 1e-6
    report(11, ok, f"largest step-to-step distance increase {worst_rise:.2e} (<= 1e-12 rounding), "
           f"largest final error {worst_final:.2e} (< 1e-6) on 20 problems", t0, 5.0)


# -- 12. exploration simplex ---------------------------------------------------


def test_criterion_12_exploration():
    t0 = time.perf_counter()
    rng = make_rng(112)
    worst_sum = 0.0
    for _ in range(200):
        q = rng.standard_normal(int(rng.integers(2, 20))) * 5
        for p in (epsilon_greedy_probs(q, rng.uniform()), softmax_probs(q, rng.uniform(0.05, 5)),
                  exp3_probs(q, rng.uniform(), rng.uniform(0.05, 5))):
            worst_sum = max(worst_sum, abs(p.sum() - 1.0))
            assert np.all(p >= 0)
    q = np.array([0.3, 2.0, -1.0, 0.7])
    closed = (np.allclose(exp3_probs(q, 1.0, 1.0), 0.25, rtol=0, atol=1e-15)
              and np.allclose(softmax_probs(np.full(5, 1.5), 0.3), 0.2, rtol=0, atol=1e-15)
              and np.array_equal(epsilon_greedy_probs(q, 0.0), [0.0, 1.0, 0.0, 0.0]))
    ok = worst_sum <= 1e-12 and closed
    report(12, ok, f"max |sum - 1| = {worst_sum:.1e} (<= 1e-12); closed forms "
           f"{'match' if closed else 'differ'}", t0, 1.0)


# -- 13. reward fuzz -----------------------------------------------------------


def test_criterion_13_reward_fuzz():
    t0 = time.perf_counter()
    rng = make_rng(113)
    cfg = NetworkConfig(num_res=9)
    env = PhaseEnv(DownlinkModel(make_instance(cfg, rng), rho=cfg.cluster_power_w), 4)
    raw = rng.uniform(-1.0, 1.0, (100_000, 9))
    starts = rng.integers(1, 4, (100_000, 9))
    lowest = np.inf
    for a, s in zip(raw, starts):
        state = PhaseConfig(tuple(int(v) for v in s), 4)
        lowest = min(lowest, env.step(state, a).reward)
    report(13, lowest >= 0.0, f"smallest reward over 100000 random steps = {lowest:.3e} (>= 0)",
           t0, 10.0)


# -- 14. determinism -----------------------------------------------------------


@pytest.mark.slow
def test_criterion_14_determinism(tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        subprocess.run([sys.executable, "-m", "risnoma.harness.cli", "run", "fig7",
                        "--seeds", "1,2,3", "--out", str(out)], check=True, capture_output=True)
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outputs[0] == outputs[1] and len(outputs[0]) > 0
    report(14, same, f"two runs of fig7 on seeds 1,2,3 wrote {len(outputs[0])} CSV files, "
           f"{'byte-identical' if same else 'DIFFERENT'}", t0, 600.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
