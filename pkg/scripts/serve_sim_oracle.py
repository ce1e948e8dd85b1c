#!/usr/bin/env python3
"""Serve a simulated target over the wire protocol, for protocol demos.

    python3 scripts/serve_sim_oracle.py --n 64 --truth 4,9 --port 4444
    precond-miner probe --oracle tcp://127.0.0.1:4444 --d-hat 2 --trace

Without --truth, the necessary set is placed uniformly (--d ids, --seed).
--mu/--sigma add per-condition dilution noise.
"""

import argparse
import time

from precond_miner import (
    GaussianNoiseSpec,
    LoopbackOracleServer,
    NecessarySet,
    NoiseProfile,
    ProblemInstance,
    sample_noise_profile,
    synthetic_catalog,
)
from precond_miner.harness import random_truth


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=64, help="catalog size (default 64)")
    parser.add_argument("--truth", help="comma-separated necessary condition ids")
    parser.add_argument("--d", type=int, default=2, help="necessary-set size when placed randomly")
    parser.add_argument("--mu", type=float, default=0.0, help="dilution noise mean (default off)")
    parser.add_argument("--sigma", type=float, default=0.05, help="dilution noise spread")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=4444)
    args = parser.parse_args()

    if args.truth:
        ids = [int(tok) for tok in args.truth.split(",") if tok.strip()]
        truth = NecessarySet.from_ids(ids, args.n)
    else:
        truth = random_truth(args.n, args.d, args.seed)
    if args.mu > 0:
        noise = sample_noise_profile(GaussianNoiseSpec(args.mu, args.sigma, args.seed), args.n)
    else:
        noise = NoiseProfile.zero(args.n)
    instance = ProblemInstance(
        catalog=synthetic_catalog(args.n), truth=truth, noise=noise, rng_seed=args.seed
    )

    with LoopbackOracleServer(instance, host=args.host, port=args.port) as server:
        print(f"serving {args.n} conditions at {server.address}")
        print(f"necessary set: {sorted(truth.ids)}")
        try:
            while True:
                time.sleep(1)
        except KeyboardInterrupt:
            print("stopping")


if __name__ == "__main__":
    main()
