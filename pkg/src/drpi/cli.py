"""Command line interface.

Subcommands:
    simulate  run a configured batch experiment and write summary/CSV files
    sweep     rerun the experiment for a list of fixed ambiguity radii
    bound     print the finite-sample radius gamma(eps) and coverage bound
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .harness import (ConfigError, default_config, dump_config, format_float,
                      load_config, run_experiment, write_summary_json)
from .uncertainty import coverage_lower_bound, gamma_for_confidence


def _add_simulate_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to a key=value config file")
    p.add_argument("--scheme", choices=["drpi", "pic", "both"],
                   help="override run.scheme")
    p.add_argument("--episodes", type=int, help="override run.episodes")
    p.add_argument("--seed", type=int, help="override run.master_seed")
    p.add_argument("--out", help="override run.out_dir")
    p.add_argument("--workers", type=int, help="override run.workers")
    p.add_argument("--save-trajectories", action="store_true",
                   help="write traj/<scheme>/traj_<episode>.csv files")


def _apply_overrides(cfg, args):
    if args.scheme:
        cfg = replace(cfg, schemes=("drpi", "pic") if args.scheme == "both"
                      else (args.scheme,))
    if args.episodes is not None:
        cfg = replace(cfg, episodes=args.episodes)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.save_trajectories:
        cfg = replace(cfg, save_trajectories=True)
    return cfg


def _print_summary(summary) -> None:
    for scheme, s in summary.items():
        arrive = ("-" if s.arrive_mean is None else
                  f"mean={s.arrive_mean:.2f}s std={s.arrive_std:.2f}s "
                  f"p95={s.arrive_p95:.2f}s")
        print(f"{scheme}: success {s.success_rate:.1f}% "
              f"({s.successes}/{s.episodes}, collisions {s.collisions}, "
              f"timeouts {s.timeouts}) arrive {arrive}")


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    summary = run_experiment(cfg)
    _print_summary(summary)
    print(f"outputs written to {cfg.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    base = _apply_overrides(load_config(args.config), args)
    gammas = [float(tok) for tok in args.gamma.split(",") if tok.strip()]
    if not gammas:
        raise ConfigError("--gamma needs a comma separated list of values")
    for gamma in gammas:
        tag = format(gamma, "g")
        cfg = replace(
            base,
            schemes=("drpi",),
            robust=replace(base.robust, schedule="fixed", gamma=gamma),
            out_dir=os.path.join(base.out_dir, f"gamma_{tag}"),
        )
        summary = run_experiment(cfg)
        s = summary["drpi"]
        arrive = "-" if s.arrive_mean is None else f"{s.arrive_mean:.2f}"
        print(f"gamma={tag}: success {s.success_rate:.1f}% arrive_mean {arrive}")
    return 0


def _cmd_bound(args) -> int:
    gamma = gamma_for_confidence(args.p, args.n, args.eps)
    print(format_float(gamma))
    print(format_float(coverage_lower_bound(gamma, args.n, args.p)))
    return 0


def _cmd_print_config(args) -> int:
    sys.stdout.write(dump_config(default_config(args.model)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drpi",
        description="Distributionally robust path integral control experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a batch experiment")
    _add_simulate_overrides(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run fixed-radius sweeps")
    _add_simulate_overrides(p_sweep)
    p_sweep.add_argument("--gamma", required=True,
                         help="comma separated ambiguity radii")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_bound = sub.add_parser(
        "bound", help="print gamma(eps) and the coverage lower bound")
    p_bound.add_argument("--p", type=int, required=True,
                         help="disturbance dimension")
    p_bound.add_argument("--n", type=int, required=True,
                         help="number of observation sequences")
    p_bound.add_argument("--eps", type=float, required=True,
                         help="confidence level complement in (0,1)")
    p_bound.set_defaults(func=_cmd_bound)

    p_cfg = sub.add_parser("print-config",
                           help="print the default config for a model family")
    p_cfg.add_argument("--model", default="double_integrator",
                       choices=["double_integrator", "unicycle"])
    p_cfg.set_defaults(func=_cmd_print_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
