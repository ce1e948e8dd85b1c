"""Generalized binary splitting search for the necessary-condition set.

Noiseless adaptive group testing: a test hardens a whole group of candidate
conditions at once and the exploit verdict says whether the group contains at
least one necessary condition (BLOCKED) or none (EXPLOITED). With a defect
budget d_hat, groups of size 2**floor(log2((n - d_hat + 1) / d_hat)) are
peeled off the front of the candidate order; an EXPLOITED group is discarded
wholesale, a BLOCKED group is halved down to a single necessary condition.
Halving only ever tests left halves: when a left half is BLOCKED the untested
right half stays in the pool as "maybe necessary" and gets rescanned later,
which is what makes the prefix bookkeeping below exact.

All of this assumes a noiseless oracle (an all-zero noise profile, or a
trusted external rig). Underestimated budgets are mopped up by
residual_check, which retests whatever is left and reruns the search until
the remainder comes back clean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InconsistencyError
from .model import TestOutcome, spec_disabling


@dataclass(frozen=True)
class SplitSearchConfig:
    """Search parameters.

    d_hat is the assumed number of necessary conditions; it does not have to
    be exact, only paid for in extra tests when it is off. item_order, when
    given, fixes the scan order of candidate ids (defaults to the order the
    items are passed in).
    """

    d_hat: int
    item_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.d_hat < 1:
            raise ValueError(f"d_hat must be at least 1, got {self.d_hat}")
        if self.item_order is not None:
            object.__setattr__(self, "item_order", tuple(int(i) for i in self.item_order))


@dataclass(frozen=True)
class SplitSearchResult:
    """Outcome of a search pass.

    remaining holds candidates the pass neither confirmed nor cleared (the
    budget ran out first). residual_positive records whether any residual
    retest came back BLOCKED, i.e. whether d_hat turned out to be an
    underestimate; it is always False for a bare generalized_binary_splitting
    pass, which runs no residual test.
    """

    defectives: frozenset[int]
    tests_used: int
    residual_positive: bool
    remaining: tuple[int, ...]


class _CountingOracle:
    """Per-search tally so nested passes share one test counter."""

    def __init__(self, inner):
        self.inner = inner
        self.count = 0

    @property
    def n(self) -> int:
        return self.inner.n

    def run(self, spec):
        self.count += 1
        return self.inner.run(spec)


def _ordered_items(items: Sequence[int], cfg: SplitSearchConfig) -> list[int]:
    out = [int(i) for i in items]
    if cfg.item_order is not None:
        position = {cid: pos for pos, cid in enumerate(cfg.item_order)}
        missing = [i for i in out if i not in position]
        if missing:
            raise ValueError(f"item_order does not cover candidate ids {missing}")
        out.sort(key=position.__getitem__)
    return out


def _group_test(oracle, ids: Sequence[int]) -> TestOutcome:
    return oracle.run(spec_disabling(oracle.n, ids))


def individual_testing(items: Sequence[int], oracle) -> frozenset[int]:
    """Test every item on its own; one test per item."""
    found = set()
    for item in items:
        if _group_test(oracle, [item]) is TestOutcome.BLOCKED:
            found.add(int(item))
    return frozenset(found)


def binary_split_once(contaminated: Sequence[int], oracle) -> tuple[int, int]:
    """Find one necessary condition inside a group already known BLOCKED.

    Returns (defective id, eliminated_count). Repeatedly tests the left half
    of the current window: BLOCKED narrows to the left half, EXPLOITED proves
    the left half clean and narrows to the right. The eliminated items are
    exactly the prefix of `contaminated` before the returned id; items after
    it that were skipped stay unresolved. Costs at most ceil(log2(len))
    tests, zero for a singleton.
    """
    group = [int(i) for i in contaminated]
    if not group:
        raise InconsistencyError("cannot split an empty group")
    lo, hi = 0, len(group)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _group_test(oracle, group[lo:mid]) is TestOutcome.BLOCKED:
            hi = mid
        else:
            lo = mid
    return group[lo], lo


def generalized_binary_splitting(
    items: Sequence[int], cfg: SplitSearchConfig, oracle
) -> SplitSearchResult:
    """One search pass under the d_hat budget; finds at most d_hat items.

    Requires a noiseless oracle. Leftover candidates (budget exhausted before
    the scan cleared them) are reported in `remaining`; run residual_check on
    them to finish the job.
    """
    pool = _ordered_items(items, cfg)
    if not pool:
        return SplitSearchResult(frozenset(), 0, False, ())
    counter = _CountingOracle(oracle)
    found: set[int] = set()
    d_rem = cfg.d_hat
    while d_rem > 0 and pool:
        n_cur = len(pool)
        if n_cur <= 2 * d_rem - 2:
            found |= individual_testing(pool, counter)
            pool = []
            break
        alpha = max(0, int(math.floor(math.log2((n_cur - d_rem + 1) / d_rem))))
        size = 1 << alpha
        subgroup = pool[:size]
        if _group_test(counter, subgroup) is TestOutcome.EXPLOITED:
            pool = pool[size:]
        else:
            item, eliminated = binary_split_once(subgroup, counter)
            found.add(item)
            d_rem -= 1
            pool = pool[eliminated + 1 :]
    return SplitSearchResult(frozenset(found), counter.count, False, tuple(pool))


def residual_check(
    remaining: Sequence[int], cfg: SplitSearchConfig, oracle, d_prime: int | None = None
) -> SplitSearchResult:
    """Retest leftovers and rerun the search until the remainder comes back clean.

    Tests the whole remainder in one shot. EXPLOITED clears it; BLOCKED means
    d_hat was an underestimate, so the search reruns on the remainder with a
    fresh budget (d_prime, defaulting to cfg.d_hat) and the retest repeats.
    """
    budget = cfg.d_hat if d_prime is None else d_prime
    if budget < 1:
        raise ValueError(f"recovery budget must be at least 1, got {budget}")
    counter = _CountingOracle(oracle)
    pool = [int(i) for i in remaining]
    found: set[int] = set()
    triggered = False
    while pool:
        if _group_test(counter, pool) is TestOutcome.EXPLOITED:
            pool = []
            break
        triggered = True
        sweep = generalized_binary_splitting(pool, SplitSearchConfig(budget), counter)
        if not sweep.defectives:
            raise InconsistencyError(
                "residual retest stayed BLOCKED but the recovery pass found nothing"
            )
        found |= sweep.defectives
        pool = list(sweep.remaining)
    return SplitSearchResult(frozenset(found), counter.count, triggered, tuple(pool))


def find_necessary_conditions(
    items: Sequence[int], cfg: SplitSearchConfig, oracle
) -> SplitSearchResult:
    """Full search: one budgeted pass plus residual recovery. Exact when noiseless."""
    first = generalized_binary_splitting(items, cfg, oracle)
    recovery = residual_check(first.remaining, cfg, oracle)
    return SplitSearchResult(
        defectives=first.defectives | recovery.defectives,
        tests_used=first.tests_used + recovery.tests_used,
        residual_positive=recovery.residual_positive,
        remaining=recovery.remaining,
    )


def repeated_binary_splitting(items: Sequence[int], d: int, oracle) -> tuple[frozenset[int], int]:
    """Baseline: run binary splitting d times, for a known count of d necessary items.

    Each round pins down the first necessary condition in scan order and
    drops it plus the prefix proven clean along the way. Exact on a noiseless
    oracle when `items` contains exactly d necessary conditions. Returns
    (found ids, tests used).
    """
    if d < 0:
        raise ValueError(f"d must be non-negative, got {d}")
    counter = _CountingOracle(oracle)
    pool = [int(i) for i in items]
    found: set[int] = set()
    for _ in range(d):
        if not pool:
            raise InconsistencyError("ran out of candidates before finding d items")
        item, eliminated = binary_split_once(pool, counter)
        found.add(item)
        pool = pool[eliminated + 1 :]
    return frozenset(found), counter.count
