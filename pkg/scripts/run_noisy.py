#!/usr/bin/env python3
"""Run the noisy adaptive-search sweep and print per-cell recall latency.

    python3 scripts/run_noisy.py [--config configs/noisy.cfg] [--outdir DIR]
"""

import argparse
from dataclasses import replace

from precond_miner import emit_report, load_config, run_noisy_benchmark, summarize


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default="configs/noisy.cfg")
    parser.add_argument("--outdir", help="override the config's output directory")
    args = parser.parse_args()

    cfg = load_config(args.config)
    if args.outdir:
        cfg = replace(cfg, outdir=args.outdir)
    rows, traces = run_noisy_benchmark(cfg)
    paths = emit_report(rows, traces, cfg.outdir, cfg)

    print(f"n={cfg.n} d_true={cfg.d_true} reps={cfg.reps} seed={cfg.seed}")
    print(f"{'mu':>5} {'sigma':>6} {'mean tests':>10} {'recall':>7} {'precision':>9} {'median t(recall=1)':>19}")
    for cell in summarize(rows):
        median = cell["median_first_full_recall"]
        print(
            f"{cell['mu']:>5.2f} {cell['sigma']:>6.2f} "
            f"{cell['mean_tests']:>10.1f} {cell['mean_recall']:>7.3f} "
            f"{cell['mean_precision']:>9.3f} "
            f"{median if median is not None else 'never':>19}"
        )
    print(f"wrote {paths['traces']} and {paths['summary']}")


if __name__ == "__main__":
    main()
