#!/usr/bin/env python3
"""Run the noiseless d_hat sweep and print the per-cell cost table.

    python3 scripts/run_noiseless.py [--config configs/noiseless.cfg] [--outdir DIR]
"""

import argparse
from dataclasses import replace

from precond_miner import emit_report, load_config, run_noiseless_benchmark, summarize


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/noiseless.cfg")
    parser.add_argument("--outdir", help="override the config's output directory")
    args = parser.parse_args()

    cfg = load_config(args.config)
    if args.outdir:
        cfg = replace(cfg, outdir=args.outdir)
    rows = run_noiseless_benchmark(cfg)
    paths = emit_report(rows, [], cfg.outdir, cfg)

    print(f"n={cfg.n} d_true={cfg.d_true} reps={cfg.reps} seed={cfg.seed}")
    print(f"{'algorithm':<28} {'d_hat':>5} {'mean tests':>10} {'std':>7} {'exact':>6}")
    for cell in summarize(rows):
        print(
            f"{cell['algorithm']:<28} {cell['d_hat']:>5} "
            f"{cell['mean_tests']:>10.2f} {cell['std_tests']:>7.2f} "
            f"{cell['exact_rate']:>6.0%}"
        )
    print(f"wrote {paths['noiseless']} and {paths['summary']}")


if __name__ == "__main__":
    main()
