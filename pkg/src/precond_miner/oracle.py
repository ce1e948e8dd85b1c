"""Simulated exploit oracle with one-sided dilution noise.

A test hardens the conditions marked in its spec. Let L be the hardened
conditions the exploit actually needs. With L empty the exploit always goes
through (EXPLOITED). Otherwise each member of L independently *dilutes* with
its own probability eps, meaning the exploit finds a way around that
hardening on this attempt; the test comes back EXPLOITED only when every
member of L dilutes, so

    P(BLOCKED) = 1 - prod(eps[c] for c in L)

Noise never flips a genuinely negative test: a spec disjoint from the
necessary set is EXPLOITED with probability one.

Per-condition dilution rates are drawn once per problem instance from a
folded normal |N(mu, sigma^2)| clamped to [0, 1] and then frozen, so repeated
tests of the same spec are i.i.d. given the instance.

All randomness flows through numpy's Philox counter-based generator so runs
replay bit-exactly across machines; RNG_ALGORITHM names it in run metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    ConditionCatalog,
    NecessarySet,
    ObservationLog,
    TestOutcome,
    TestRecord,
    TestSpec,
)

RNG_ALGORITHM = "philox4x64 (numpy.random.Philox)"


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; `seed` is an int or a numpy SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class GaussianNoiseSpec:
    """Parameters for sampling per-condition dilution rates."""

    mu: float
    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class NoiseProfile:
    """Frozen per-condition dilution probabilities."""

    epsilons: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.epsilons, dtype=float)
        if arr.ndim != 1:
            raise ValueError("epsilons must be a 1-D vector")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("dilution probabilities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "epsilons", arr)

    @classmethod
    def zero(cls, n: int) -> "NoiseProfile":
        return cls(np.zeros(n, dtype=float))

    @property
    def n(self) -> int:
        return len(self.epsilons)

    @property
    def is_noiseless(self) -> bool:
        return bool(np.all(self.epsilons == 0.0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NoiseProfile):
            return NotImplemented
        return np.array_equal(self.epsilons, other.epsilons)


def sample_noise_profile(spec: GaussianNoiseSpec, n: int) -> NoiseProfile:
    """Draw n dilution rates from |N(mu, sigma^2)| clamped to [0, 1]."""
    if n < 1:
        raise ValueError(f"profile length must be positive, got {n}")
    rng = make_rng(spec.seed)
    eps = np.minimum(np.abs(rng.normal(spec.mu, spec.sigma, size=n)), 1.0)
    return NoiseProfile(eps)


@dataclass(frozen=True)
class ProblemInstance:
    """A complete simulated target: catalog, hidden truth, frozen noise, RNG seed."""

    catalog: ConditionCatalog
    truth: NecessarySet
    noise: NoiseProfile
    rng_seed: int

    def __post_init__(self):
        if self.truth.n != self.catalog.n:
            raise ValueError(
                f"truth length {self.truth.n} does not match catalog size {self.catalog.n}"
            )
        if self.noise.n != self.catalog.n:
            raise ValueError(
                f"noise profile length {self.noise.n} does not match catalog size {self.catalog.n}"
            )

    @property
    def n(self) -> int:
        return self.catalog.n


@dataclass
class OracleStats:
    tests_issued: int = 0
    blocked_count: int = 0
    exploited_count: int = 0

    def record(self, outcome: TestOutcome) -> None:
        self.tests_issued += 1
        if outcome is TestOutcome.BLOCKED:
            self.blocked_count += 1
        else:
            self.exploited_count += 1


def _hit_rates(instance: ProblemInstance, spec: TestSpec) -> list[float]:
    # dilution rates of necessary conditions this spec hardens
    disabled = spec.disabled
    eps = instance.noise.epsilons
    return [float(eps[j]) for j in instance.truth.ids if disabled[j]]


def block_probability(instance: ProblemInstance, spec: TestSpec) -> float:
    """Exact P(BLOCKED) for a spec under the instance's frozen noise."""
    if spec.n != instance.n:
        raise ValueError(f"spec length {spec.n} does not match instance size {instance.n}")
    rates = _hit_rates(instance, spec)
    if not rates:
        return 0.0
    return 1.0 - float(np.prod(rates))


def execute_test_simulated(
    instance: ProblemInstance, spec: TestSpec, rng: np.random.Generator
) -> TestOutcome:
    """One hardened exploit attempt against the simulated target."""
    if spec.n != instance.n:
        raise ValueError(f"spec length {spec.n} does not match instance size {instance.n}")
    rates = _hit_rates(instance, spec)
    if not rates:
        return TestOutcome.EXPLOITED
    draws = rng.random(len(rates))
    if np.all(draws < np.asarray(rates)):
        return TestOutcome.EXPLOITED
    return TestOutcome.BLOCKED


def count_blocked(
    instance: ProblemInstance, spec: TestSpec, rng: np.random.Generator, trials: int
) -> int:
    """Blocked count over `trials` independent attempts (vectorised Monte Carlo)."""
    if trials < 0:
        raise ValueError("trials must be non-negative")
    rates = _hit_rates(instance, spec)
    if not rates:
        return 0
    draws = rng.random((trials, len(rates)))
    all_diluted = np.all(draws < np.asarray(rates), axis=1)
    return int(trials - all_diluted.sum())


class SimulatedOracle:
    """Stateful oracle over one problem instance.

    Holds its own Philox stream (seeded from the instance) and usage counters.
    Not safe for concurrent use; give each worker its own oracle.
    """

    def __init__(self, instance: ProblemInstance, stats: OracleStats | None = None):
        self.instance = instance
        self.stats = stats if stats is not None else OracleStats()
        self._rng = make_rng(instance.rng_seed)

    @property
    def n(self) -> int:
        return self.instance.n

    def run(self, spec: TestSpec) -> TestOutcome:
        outcome = execute_test_simulated(self.instance, spec, self._rng)
        self.stats.record(outcome)
        return outcome


class RecordingOracle:
    """Wraps any oracle, keeping an ObservationLog of everything issued.

    The optional observer is called as observer(sequence_number, disabled_ids,
    outcome) after each test; the probe CLI uses it to stream a trace line per
    test.
    """

    def __init__(self, inner, observer=None):
        self.inner = inner
        self.observer = observer
        self.records: list[TestRecord] = []

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def stats(self):
        return getattr(self.inner, "stats", None)

    def run(self, spec: TestSpec) -> TestOutcome:
        outcome = self.inner.run(spec)
        rec = TestRecord(spec, outcome, len(self.records))
        self.records.append(rec)
        if self.observer is not None:
            self.observer(rec.sequence_number, rec.spec.disabled_ids, outcome)
        return outcome

    def log(self) -> ObservationLog:
        return ObservationLog(tuple(self.records), self.n)
