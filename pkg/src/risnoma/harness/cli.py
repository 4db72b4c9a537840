"""Command-line entry point: ``risnoma run <experiment> | list | selftest``."""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .config import ALIASES, EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment
from .io import write_result


def _parser():
    p = argparse.ArgumentParser(prog="risnoma", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write its CSV files")
    run.add_argument("experiment", help="experiment id (see `risnoma list`)")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--seeds", help="comma-separated seed list, e.g. 1,2,3")
    sub.add_parser("list", help="list the available experiments")
    sub.add_parser("selftest", help="quick physics and learning sanity checks")
    return p


def _cmd_run(args):
    overrides = list(args.set)
    if args.seeds is not None:
        overrides.append(f"seeds={args.seeds}")
    exp = ALIASES.get(args.experiment, args.experiment)
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {args.experiment!r}")
    cfg = load_config(args.config, overrides, experiment=exp)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    paths = write_result(result, args.out)
    dt = time.perf_counter() - t0
    for path in paths:
        print(f"wrote {path}")
    print(f"{exp}: {len(result.records)} seed(s) in {dt:.1f} s", file=sys.stderr)
    return 0


def _cmd_list():
    for name, desc in EXPERIMENTS.items():
        print(f"{name:8s} {desc}")
    for alias, target in ALIASES.items():
        print(f"{alias:8s} alias of {target}")
    return 0


def selftest():
    """Small end-to-end checks; returns a list of (name, ok, detail)."""
    from ..agent.mlp import Mlp
    from ..baselines import exhaustive_search, random_phase
    from ..channel import NetworkConfig, make_instance
    from ..clustering import MomaClusterer, mismatch_count, well_separated_pairs
    from ..noma import DownlinkModel, zf_precode
    from ..numerics import make_rng
    from ..rlenv import PhaseEnv

    out = []
    rng = make_rng(0)
    worst = 0.0
    for _ in range(100):
        h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        worst = max(worst, np.max(np.abs(h @ zf_precode(h) - np.eye(4))))
    out.append(("zero-forcing", worst < 1e-9, f"max |HP - I| = {worst:.1e}"))

    net = Mlp([3, 5, 2], "tanh", rng=1)
    x = rng.standard_normal((2, 3))
    _, cache = net.forward(x)
    wg, _, _ = net.backward(cache, np.ones((2, 2)))
    h = 1e-6
    w = net.weights[0]
    w[0, 0] += h
    fp = net(x).sum()
    w[0, 0] -= 2 * h
    fm = net(x).sum()
    w[0, 0] += h
    fd = (fp - fm) / (2 * h)
    out.append(("backprop", abs(fd - wg[0][0, 0]) < 1e-6 * max(1, abs(fd)),
                f"analytic {wg[0][0, 0]:.6g} vs numeric {fd:.6g}"))

    feats, groups, labels = well_separated_pairs(4, make_rng(2))
    est = MomaClusterer(random_state=3).fit(feats, groups)
    mm = mismatch_count(est.labels_, labels)
    out.append(("moma", mm == 0, f"{mm} mismatches after {est.n_queries_} queries"))

    cfg = NetworkConfig(num_res=4)
    env = PhaseEnv(DownlinkModel(make_instance(cfg, 4), rho=cfg.cluster_power_w), 4)
    _, best = exhaustive_search(env)
    mean = random_phase(env, make_rng(5), 200).mean()
    out.append(("exhaustive", best >= mean, f"optimum {best:.3f} vs random mean {mean:.3f}"))
    return out


def _cmd_selftest():
    results = selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list":
            return _cmd_list()
        return _cmd_selftest()
    except (ConfigError, OSError, ValueError, ArithmeticError) as exc:
        print(f"risnoma: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
