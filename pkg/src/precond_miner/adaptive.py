"""Adaptive noisy search: epsilon-greedy testing driven by diagnosis posteriors.

The noiseless splitting search falls apart under dilution noise, so here the
tester keeps an observation log, periodically decodes it into per-condition
probabilities (summing diagnosis posteriors over the candidates containing
each condition), and splits its budget between *exploration* (a fresh random
group avoiding the current suspects, to surface conditions the log has not
implicated yet) and *exploitation* (retesting one suspect on its own, to
confirm or clear it). Exploration probability epsilon decays every iteration
down to a floor, after a purely exploratory bootstrap of random group tests.

A suspect set is accepted once it has been stable across a window of decodes
and every member has enough singleton BLOCKED confirmations with none
contradicted since. Because dilution noise is one-sided, a condition the
exploit does not need can never produce a BLOCKED singleton, so a converged
suspect set carries no false positives; the loop otherwise stops at its
iteration budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .barinel import MleConfig, DiagnosticReport, rank_diagnoses, staccato_candidates
from .model import (
    NecessarySet,
    ObservationLog,
    TestOutcome,
    TestRecord,
    TestSpec,
    recall_precision,
    spec_disabling,
)
from .oracle import make_rng

MODE_EXPLORE = "explore"
MODE_EXPLOIT = "exploit"


@dataclass(frozen=True)
class AdaptiveConfig:
    """Knobs for the adaptive loop.

    Defaults follow the benchmark harness: a 30-test bootstrap, decode every
    10 iterations, epsilon from 0.9 down to 0.1 at 0.995 per iteration.
    """

    d_hat: int
    epsilon0: float = 0.9
    decay: float = 0.995
    epsilon_min: float = 0.1
    bootstrap_len: int = 30
    decode_freq: int = 10
    max_iters: int = 4000
    convergence_window: int = 3
    confirm_count: int = 2
    rng_seed: int = 0
    staccato_cap: int = 100
    prior_p: float = 0.01
    mle: MleConfig = field(default_factory=MleConfig)

    def __post_init__(self):
        if self.d_hat < 1:
            raise ValueError("d_hat must be at least 1")
        if not 0.0 <= self.epsilon_min <= self.epsilon0 <= 1.0:
            raise ValueError("need 0 <= epsilon_min <= epsilon0 <= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.bootstrap_len < 0:
            raise ValueError("bootstrap_len must be non-negative")
        if self.decode_freq < 1:
            raise ValueError("decode_freq must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be at least 1")
        if self.confirm_count < 1:
            raise ValueError("confirm_count must be at least 1")
        if self.staccato_cap < 1:
            raise ValueError("staccato_cap must be at least 1")


@dataclass(frozen=True, eq=False)
class ConditionPosterior:
    """One decode: per-condition probabilities and the suspect set drawn from them."""

    probs: np.ndarray
    top_set: tuple[int, ...]
    iteration: int

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "top_set", tuple(int(c) for c in self.top_set))


@dataclass(frozen=True)
class TraceRow:
    """Per-test trace entry; recall/precision are None without ground truth."""

    iteration: int
    epsilon: float
    mode: str
    outcome: TestOutcome
    recall: float | None
    precision: float | None
    tests_used: int


@dataclass(frozen=True)
class AdaptiveSearchResult:
    posterior: ConditionPosterior
    log: ObservationLog
    trace: tuple[TraceRow, ...]

    @property
    def suspected(self) -> tuple[int, ...]:
        return self.posterior.top_set


def top_conditions(probs: np.ndarray, d_hat: int) -> tuple[int, ...]:
    """The d_hat highest-probability condition ids, ties to the lower id.

    Zero-probability conditions never make the cut, so the set can be smaller
    than d_hat. Returned sorted by id.
    """
    order = sorted(np.flatnonzero(probs > 0.0), key=lambda c: (-probs[c], c))
    return tuple(sorted(int(c) for c in order[:d_hat]))


def probability_summation(
    report: DiagnosticReport, n: int, *, d_hat: int, iteration: int = 0
) -> ConditionPosterior:
    """Fold diagnosis posteriors into per-condition probabilities.

    P(c) sums the posterior of every ranked diagnosis containing c; an empty
    report yields all zeros and an empty suspect set.
    """
    probs = np.zeros(n, dtype=float)
    for diag in report.diagnoses:
        for cid in diag.components:
            probs[cid] += diag.posterior
    return ConditionPosterior(probs, top_conditions(probs, d_hat), iteration)


def epsilon_greedy_select(
    top: Sequence[int],
    universe: Sequence[int],
    epsilon: float,
    group_size: int,
    rng: np.random.Generator,
    *,
    n: int,
) -> tuple[TestSpec, str]:
    """Pick the next test: explore a random group off the suspects, or retest one.

    With probability epsilon (and always when the suspect set is empty) the
    test disables group_size conditions sampled uniformly without replacement
    from universe minus the suspects, shrinking if fewer are available.
    Otherwise it disables a single suspect chosen uniformly. Returns the
    test to issue and which mode produced it.
    """
    suspects = [int(c) for c in top]
    explore = not suspects or float(rng.random()) < epsilon
    if explore:
        pool = sorted(set(int(c) for c in universe) - set(suspects))
        if pool:
            size = min(group_size, len(pool))
            ids = rng.choice(pool, size=size, replace=False)
            return spec_disabling(n, (int(i) for i in ids)), MODE_EXPLORE
        # nothing left to explore, fall through to a suspect retest
    cid = suspects[int(rng.integers(len(suspects)))]
    return spec_disabling(n, [cid]), MODE_EXPLOIT


def _singleton_summary(log: ObservationLog, members: Sequence[int]):
    """Per-member (blocked singleton count, outcome of the latest singleton)."""
    wanted = set(members)
    blocked = {c: 0 for c in wanted}
    latest: dict[int, TestOutcome] = {}
    for rec in log.records:
        ids = rec.spec.disabled_ids
        if len(ids) != 1 or ids[0] not in wanted:
            continue
        if rec.outcome is TestOutcome.BLOCKED:
            blocked[ids[0]] += 1
        latest[ids[0]] = rec.outcome
    return blocked, latest


def has_converged(
    history: Sequence[ConditionPosterior], log: ObservationLog, cfg: AdaptiveConfig
) -> bool:
    """Accept the current suspect set, or give up at the iteration budget.

    Requires the suspect set to be identical over the last convergence_window
    decodes, every member to have at least confirm_count BLOCKED singleton
    tests, and no member's most recent singleton test to be EXPLOITED.
    """
    # the budget stop applies even if no decode has happened yet
    if log.N - cfg.bootstrap_len >= cfg.max_iters:
        return True
    if not history:
        return False
    if len(history) < cfg.convergence_window:
        return False
    current = history[-1].top_set
    if not current:
        return False
    if any(h.top_set != current for h in history[-cfg.convergence_window :]):
        return False
    blocked, latest = _singleton_summary(log, current)
    for member in current:
        if blocked[member] < cfg.confirm_count:
            return False
        if latest.get(member) is not TestOutcome.BLOCKED:
            return False
    return True


def run_adaptive_barinel(
    universe: Sequence[int],
    cfg: AdaptiveConfig,
    oracle,
    truth: NecessarySet | None = None,
) -> AdaptiveSearchResult:
    """Run the adaptive loop until convergence or the iteration budget.

    `universe` lists the candidate condition ids (usually all of them); the
    oracle may be simulated or remote. When `truth` is given (simulation),
    every trace row carries recall/precision of the suspect set at that
    point. The iteration axis counts every issued test, bootstrap included.
    """
    ids = tuple(int(c) for c in universe)
    if not ids:
        raise ValueError("universe must be non-empty")
    n = oracle.n
    rng = make_rng(cfg.rng_seed)

    m = len(ids)
    ratio = (m - cfg.d_hat + 1) / cfg.d_hat
    alpha = max(0, int(math.floor(math.log2(ratio)))) if ratio >= 1 else 0
    group_size = min(1 << alpha, m)

    records: list[TestRecord] = []
    trace: list[TraceRow] = []
    universe_arr = np.array(ids)

    def score(top: Sequence[int]):
        if truth is None:
            return None, None
        metrics = recall_precision(top, truth)
        return metrics.recall, metrics.precision

    def issue(spec: TestSpec, mode: str, eps_now: float, top: Sequence[int]) -> None:
        outcome = oracle.run(spec)
        seq = len(records)
        records.append(TestRecord(spec, outcome, seq))
        recall, precision = score(top)
        trace.append(
            TraceRow(
                iteration=seq,
                epsilon=eps_now,
                mode=mode,
                outcome=outcome,
                recall=recall,
                precision=precision,
                tests_used=seq + 1,
            )
        )

    for _ in range(cfg.bootstrap_len):
        picked = rng.choice(universe_arr, size=group_size, replace=False)
        issue(spec_disabling(n, (int(i) for i in picked)), MODE_EXPLORE, cfg.epsilon0, ())

    history: list[ConditionPosterior] = []
    epsilon = cfg.epsilon0
    iteration = 0
    while True:
        if iteration % cfg.decode_freq == 0:
            log_now = ObservationLog(tuple(records), n)
            candidates = staccato_candidates(log_now, cfg.staccato_cap)
            report = rank_diagnoses(candidates, log_now, cfg.prior_p, cfg.mle)
            history.append(
                probability_summation(report, n, d_hat=cfg.d_hat, iteration=len(history))
            )
        top = history[-1].top_set
        spec, mode = epsilon_greedy_select(top, ids, epsilon, group_size, rng, n=n)
        issue(spec, mode, epsilon, top)
        iteration += 1
        epsilon = max(cfg.epsilon_min, epsilon * cfg.decay)
        log_now = ObservationLog(tuple(records), n)
        if has_converged(history, log_now, cfg):
            break

    return AdaptiveSearchResult(history[-1], ObservationLog(tuple(records), n), tuple(trace))
