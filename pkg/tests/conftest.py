"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from precond_miner import (
    NecessarySet,
    NoiseProfile,
    ObservationLog,
    ProblemInstance,
    SimulatedOracle,
    TestOutcome,
    TestRecord,
    spec_disabling,
    synthetic_catalog,
)


def noiseless_instance(n: int, true_ids, seed: int = 0) -> ProblemInstance:
    return ProblemInstance(
        catalog=synthetic_catalog(n),
        truth=NecessarySet.from_ids(true_ids, n),
        noise=NoiseProfile.zero(n),
        rng_seed=seed,
    )


def noiseless_oracle(n: int, true_ids, seed: int = 0) -> SimulatedOracle:
    return SimulatedOracle(noiseless_instance(n, true_ids, seed))


def noisy_instance(n: int, true_ids, epsilons, seed: int = 0) -> ProblemInstance:
    return ProblemInstance(
        catalog=synthetic_catalog(n),
        truth=NecessarySet.from_ids(true_ids, n),
        noise=NoiseProfile(np.asarray(epsilons, dtype=float)),
        rng_seed=seed,
    )


def build_log(n: int, rows) -> ObservationLog:
    """rows: iterable of (disabled ids, outcome or outcome value string)."""
    records = []
    for seq, (ids, outcome) in enumerate(rows):
        if isinstance(outcome, str):
            outcome = TestOutcome(outcome)
        records.append(TestRecord(spec_disabling(n, ids), outcome, seq))
    return ObservationLog(tuple(records), n)
