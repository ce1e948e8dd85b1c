import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noiseless_instance, noiseless_oracle, noisy_instance
from precond_miner import (
    GaussianNoiseSpec,
    NoiseProfile,
    OracleStats,
    RecordingOracle,
    SimulatedOracle,
    TestOutcome,
    block_probability,
    execute_test_simulated,
    make_rng,
    sample_noise_profile,
    spec_disabling,
)
from precond_miner.oracle import RNG_ALGORITHM, count_blocked


def folded_normal_mean(mu: float, sigma: float) -> float:
    # E|N(mu, sigma^2)|, straight from the distribution's moment formula
    return sigma * math.sqrt(2 / math.pi) * math.exp(-(mu**2) / (2 * sigma**2)) + mu * math.erf(
        mu / (sigma * math.sqrt(2))
    )


def test_rng_algorithm_is_philox():
    assert "philox" in RNG_ALGORITHM.lower()
    assert type(make_rng(1).bit_generator).__name__ == "Philox"


def test_noise_profile_mean_matches_folded_normal():
    mu, sigma = 0.1, 0.05
    profile = sample_noise_profile(GaussianNoiseSpec(mu, sigma, seed=91), n=200_000)
    # standard error is sigma/sqrt(n) ~ 1.1e-4; the clamp at 1 is ~18 sigma away
    assert profile.epsilons.mean() == pytest.approx(folded_normal_mean(mu, sigma), abs=6e-4)


def test_noise_profile_sigma_zero_is_constant():
    profile = sample_noise_profile(GaussianNoiseSpec(0.15, 0.0, seed=3), n=64)
    assert np.all(profile.epsilons == 0.15)
    assert not profile.is_noiseless


def test_noise_profile_clamped_to_unit_interval():
    profile = sample_noise_profile(GaussianNoiseSpec(2.0, 0.3, seed=8), n=500)
    assert profile.epsilons.max() == 1.0
    assert profile.epsilons.min() >= 0.0


def test_noise_profile_deterministic_per_seed():
    a = sample_noise_profile(GaussianNoiseSpec(0.1, 0.05, seed=6), n=32)
    b = sample_noise_profile(GaussianNoiseSpec(0.1, 0.05, seed=6), n=32)
    c = sample_noise_profile(GaussianNoiseSpec(0.1, 0.05, seed=7), n=32)
    assert a == b
    assert a != c


def test_noise_profile_validation():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        NoiseProfile(np.array([0.5, 1.2]))
    with pytest.raises(ValueError, match="sigma"):
        GaussianNoiseSpec(0.1, -0.01, seed=0)
    assert NoiseProfile.zero(4).is_noiseless


def test_noiseless_oracle_agrees_with_truth_on_every_spec():
    n, truth = 10, (2, 7)
    oracle = noiseless_oracle(n, truth)
    for ids in itertools.chain.from_iterable(
        itertools.combinations(range(n), k) for k in range(n + 1)
    ):
        expected = TestOutcome.BLOCKED if set(ids) & set(truth) else TestOutcome.EXPLOITED
        assert oracle.run(spec_disabling(n, ids)) is expected
    assert oracle.stats.tests_issued == 2**n


def test_block_probability_frozen_values():
    eps = np.zeros(10)
    eps[2], eps[7] = 0.1, 0.3
    inst = noisy_instance(10, [2, 7], eps)
    assert block_probability(inst, spec_disabling(10, [2, 7])) == pytest.approx(0.97)
    assert block_probability(inst, spec_disabling(10, [2])) == pytest.approx(0.9)
    assert block_probability(inst, spec_disabling(10, [7, 9])) == pytest.approx(0.7)
    # specs that miss the necessary set can never block
    assert block_probability(inst, spec_disabling(10, [])) == 0.0
    assert block_probability(inst, spec_disabling(10, [0, 1, 3])) == 0.0


def test_block_probability_rejects_length_mismatch():
    inst = noiseless_instance(4, [1])
    with pytest.raises(ValueError, match="does not match"):
        block_probability(inst, spec_disabling(5, [1]))


def test_degenerate_dilution_rates():
    # rate 1: the hardened necessary condition always dilutes away
    inst = noisy_instance(4, [2], [0, 0, 1.0, 0])
    rng = make_rng(0)
    assert all(
        execute_test_simulated(inst, spec_disabling(4, [2]), rng) is TestOutcome.EXPLOITED
        for _ in range(50)
    )
    # rate 0: hardening it always blocks
    inst0 = noisy_instance(4, [2], [0, 0, 0.0, 0])
    assert all(
        execute_test_simulated(inst0, spec_disabling(4, [2]), rng) is TestOutcome.BLOCKED
        for _ in range(50)
    )


@settings(max_examples=80)
@given(st.data())
def test_noise_is_one_sided(data):
    n = data.draw(st.integers(2, 10))
    truth_ids = data.draw(st.sets(st.integers(0, n - 1), max_size=n - 1))
    others = sorted(set(range(n)) - truth_ids)
    spec_ids = data.draw(st.sets(st.sampled_from(others))) if others else set()
    eps = data.draw(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=n, max_size=n)
    )
    inst = noisy_instance(n, truth_ids, eps, seed=data.draw(st.integers(0, 2**32)))
    spec = spec_disabling(n, spec_ids)
    assert block_probability(inst, spec) == 0.0
    assert execute_test_simulated(inst, spec, make_rng(0)) is TestOutcome.EXPLOITED


def test_monte_carlo_matches_block_probability():
    eps = np.zeros(12)
    eps[[1, 5]] = [0.2, 0.5]
    inst = noisy_instance(12, [1, 5], eps)
    spec = spec_disabling(12, [1, 5, 9])
    p = block_probability(inst, spec)
    assert p == pytest.approx(0.9)
    trials = 100_000
    blocked = count_blocked(inst, spec, make_rng(1234), trials)
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(blocked / trials - p) <= 3 * sigma


def test_simulated_oracle_stats_and_reproducibility():
    eps = np.full(8, 0.4)
    inst = noisy_instance(8, [3], eps, seed=17)
    a, b = SimulatedOracle(inst), SimulatedOracle(inst)
    spec = spec_disabling(8, [3])
    outcomes_a = [a.run(spec) for _ in range(40)]
    outcomes_b = [b.run(spec) for _ in range(40)]
    assert outcomes_a == outcomes_b
    assert a.stats.tests_issued == 40
    assert a.stats.blocked_count + a.stats.exploited_count == 40
    assert a.stats.blocked_count > 0 and a.stats.exploited_count > 0


def test_recording_oracle_builds_log_and_notifies():
    oracle = noiseless_oracle(6, [4])
    seen = []
    rec = RecordingOracle(oracle, observer=lambda seq, ids, outcome: seen.append((seq, ids, outcome)))
    assert rec.n == 6
    rec.run(spec_disabling(6, [4]))
    rec.run(spec_disabling(6, [0, 1]))
    log = rec.log()
    assert log.N == 2
    assert log.records[0].outcome is TestOutcome.BLOCKED
    assert log.records[1].outcome is TestOutcome.EXPLOITED
    assert seen == [
        (0, (4,), TestOutcome.BLOCKED),
        (1, (0, 1), TestOutcome.EXPLOITED),
    ]
    assert rec.stats.tests_issued == 2


def test_oracle_stats_record():
    stats = OracleStats()
    stats.record(TestOutcome.BLOCKED)
    stats.record(TestOutcome.EXPLOITED)
    stats.record(TestOutcome.BLOCKED)
    assert (stats.tests_issued, stats.blocked_count, stats.exploited_count) == (3, 2, 1)
