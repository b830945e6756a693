#!/usr/bin/env python3
"""Run the navigation benchmarks for both schemes and print a results table.

Usage:
    python scripts/run_benchmark.py [--episodes N] [--workers W] [--out DIR]

With the defaults this reproduces the full 100-episode comparison for the
double integrator and the unicycle; pass a smaller --episodes for a quick
look. Summaries and per-episode CSVs land under --out.
"""

import argparse
import os
import time
from dataclasses import replace

from drpi.harness import default_config, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--seed", type=int, default=20260810)
    ap.add_argument("--out", default="out/benchmark")
    args = ap.parse_args()

    rows = []
    for family in ("double_integrator", "unicycle"):
        cfg = replace(default_config(family),
                      episodes=args.episodes, workers=args.workers,
                      master_seed=args.seed,
                      out_dir=os.path.join(args.out, family))
        t0 = time.perf_counter()
        summary = run_experiment(cfg)
        elapsed = time.perf_counter() - t0
        for scheme in cfg.schemes:
            s = summary[scheme]
            rows.append((family, scheme, s.success_rate, s.arrive_mean,
                         s.arrive_std, s.arrive_p95))
        print(f"{family}: {elapsed / 60:.1f} min")

    print(f"\n{'model':<18} {'scheme':<6} {'success %':>9} "
          f"{'mean (s)':>9} {'std (s)':>8} {'95 pct (s)':>10}")
    for family, scheme, rate, mean, std, p95 in rows:
        fmt = lambda v: "-" if v is None else f"{v:.2f}"
        print(f"{family:<18} {scheme:<6} {rate:>9.1f} "
              f"{fmt(mean):>9} {fmt(std):>8} {fmt(p95):>10}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
