"""Barinel-style probabilistic diagnosis of an observation log.

Each BLOCKED test contributes a *conflict*: its disabled set must contain at
least one necessary condition. Candidate diagnoses are minimal hitting sets
of the conflicts (Staccato-style ranked enumeration, with an exhaustive
reference implementation for small logs). Each candidate d gets a per-member
goodness g_j, the probability that hardening member j alone still lets the
exploit through. The likelihood of one record under d is

    prod(g_j for j in d & trace)          if the test was EXPLOITED
    1 - prod(g_j for j in d & trace)      if the test was BLOCKED

with the empty intersection giving 1 and 0 respectively. Goodness values are
fitted by gradient ascent on the log-likelihood, and candidates are ranked by
posterior, combining the fitted likelihood with an independent-fault prior
p**|d| * (1-p)**(M-|d|) over the M catalog conditions.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InconsistencyError, NumericalError
from .model import ObservationLog, TestOutcome, TestRecord

_EXHAUSTIVE_COMPONENT_LIMIT = 20


@dataclass(frozen=True)
class MleConfig:
    """Gradient-ascent settings for the goodness fit."""

    step_size: float = 0.1
    stop_tol: float = 1e-6
    max_iters: int = 1000
    g_init: float = 0.5
    g_clamp: float = 1e-6

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.g_init < 1.0:
            raise ValueError("g_init must lie strictly inside (0, 1)")
        if not 0.0 < self.g_clamp < 0.5:
            raise ValueError("g_clamp must lie in (0, 0.5)")


@dataclass(frozen=True)
class Diagnosis:
    """One ranked candidate: components, fitted goodness, likelihood, posterior."""

    components: frozenset[int]
    goodness: tuple[tuple[int, float], ...]
    log_likelihood: float
    posterior: float

    def goodness_map(self) -> dict[int, float]:
        return dict(self.goodness)


@dataclass(frozen=True)
class DiagnosticReport:
    """Diagnoses sorted by descending posterior; posteriors sum to one."""

    diagnoses: tuple[Diagnosis, ...]
    normalization: float
    log_normalization: float

    @classmethod
    def empty(cls) -> "DiagnosticReport":
        return cls((), 0.0, float("-inf"))


def conflicts_from_log(log: ObservationLog) -> list[frozenset[int]]:
    """Distinct BLOCKED traces, reduced to the subset-minimal ones.

    A hitting set for the minimal conflicts hits every superset conflict too,
    so the reduction never changes the hitting-set family.
    """
    seen: set[frozenset[int]] = set()
    traces: list[frozenset[int]] = []
    for rec in log.records:
        if rec.outcome is not TestOutcome.BLOCKED:
            continue
        trace = frozenset(rec.spec.disabled_ids)
        if not trace:
            raise InconsistencyError(
                f"blocked record {rec.sequence_number} disabled nothing"
            )
        if trace not in seen:
            seen.add(trace)
            traces.append(trace)
    traces.sort(key=lambda t: (len(t), tuple(sorted(t))))
    minimal: list[frozenset[int]] = []
    for trace in traces:
        if not any(kept <= trace for kept in minimal):
            minimal.append(trace)
    return minimal


def ochiai_scores(log: ObservationLog) -> np.ndarray:
    """Per-condition similarity to the failure vector (Ochiai coefficient)."""
    activity = log.activity_matrix()
    errors = log.error_vector()
    total_failed = int(errors.sum())
    in_failed = activity[errors].sum(axis=0).astype(float)
    in_any = activity.sum(axis=0).astype(float)
    denom = np.sqrt(total_failed * in_any)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, in_failed / denom, 0.0)
    return scores


class _CandidatePool:
    """Insertion with two-way subsumption: keeps an antichain of hitting sets."""

    def __init__(self):
        self.sets: list[frozenset[int]] = []

    def add(self, candidate: frozenset[int]) -> None:
        for kept in self.sets:
            if kept <= candidate:
                return
        self.sets = [kept for kept in self.sets if not candidate < kept]
        self.sets.append(candidate)


def staccato_candidates(
    log: ObservationLog,
    cap: int | None = 100,
    node_budget: int | None = None,
) -> tuple[frozenset[int], ...]:
    """Minimal hitting sets of the BLOCKED traces, best candidates first.

    Conflict-directed depth-first enumeration: at each step branch on the
    members of the smallest uncovered conflict, trying components in
    descending Ochiai order, with already-tried siblings banned from the
    subtree so no set is generated twice. With cap=None (and no node budget)
    the enumeration is exhaustive and returns exactly the minimal hitting
    sets; with a cap it stops after `cap` candidates and is best-effort,
    though the returned family is always mutually minimal and every member
    hits every conflict.
    """
    if cap is not None and cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    conflicts = conflicts_from_log(log)
    if not conflicts:
        return ()
    scores = ochiai_scores(log)
    rank = {cid: (-float(scores[cid]), cid) for cid in set().union(*conflicts)}

    if node_budget is None and cap is not None:
        node_budget = max(20_000, 200 * cap)
    pool = _CandidatePool()
    nodes = 0

    def exhausted() -> bool:
        if cap is not None and len(pool.sets) >= cap:
            return True
        return node_budget is not None and nodes >= node_budget

    def dfs(uncovered: list[frozenset[int]], chosen: frozenset[int], banned: frozenset[int]):
        nonlocal nodes
        if exhausted():
            return
        nodes += 1
        if not uncovered:
            pool.add(chosen)
            return
        # conflicts stay sorted by (size, ids), so the head is the tightest choice
        branch = sorted(uncovered[0] - banned, key=rank.__getitem__)
        for i, cid in enumerate(branch):
            rest = [c for c in uncovered if cid not in c]
            dfs(rest, chosen | {cid}, banned | frozenset(branch[:i]))
            if exhausted():
                return

    dfs(conflicts, frozenset(), frozenset())

    def heuristic(candidate: frozenset[int]):
        mean_score = sum(scores[c] for c in candidate) / len(candidate)
        return (-mean_score, len(candidate), tuple(sorted(candidate)))

    ordered = sorted(pool.sets, key=heuristic)
    if cap is not None:
        ordered = ordered[:cap]
    return tuple(ordered)


def exhaustive_minimal_hitting_sets(log: ObservationLog) -> frozenset[frozenset[int]]:
    """Reference enumeration by brute force over subsets, small logs only."""
    conflicts = conflicts_from_log(log)
    if not conflicts:
        return frozenset()
    elements = sorted(set().union(*conflicts))
    if len(elements) > _EXHAUSTIVE_COMPONENT_LIMIT:
        raise ValueError(
            f"{len(elements)} distinct components exceed the exhaustive limit "
            f"of {_EXHAUSTIVE_COMPONENT_LIMIT}"
        )
    index = {cid: bit for bit, cid in enumerate(elements)}
    conflict_masks = [sum(1 << index[c] for c in conflict) for conflict in conflicts]
    kept_masks: list[int] = []
    kept: list[frozenset[int]] = []
    for size in range(1, len(elements) + 1):
        for combo in itertools.combinations(range(len(elements)), size):
            mask = sum(1 << bit for bit in combo)
            if any(km & mask == km for km in kept_masks):
                continue
            if all(mask & cm for cm in conflict_masks):
                kept_masks.append(mask)
                kept.append(frozenset(elements[bit] for bit in combo))
    return frozenset(kept)


def observation_likelihood(
    record: TestRecord, components: Iterable[int], goodness: dict[int, float]
) -> float:
    """Probability of one record's outcome under a diagnosis with fixed goodness."""
    disabled = record.spec.disabled
    passthrough = 1.0
    for cid in components:
        if disabled[cid]:
            passthrough *= goodness[cid]
    if record.outcome is TestOutcome.EXPLOITED:
        return passthrough
    return 1.0 - passthrough


def _patterns(activity: np.ndarray, errors: np.ndarray, comp: Sequence[int]):
    """Collapse records to distinct (membership mask, outcome) rows with counts.

    The likelihood only depends on which diagnosis members a trace hits and
    whether the test failed, so fitting works on the collapsed rows.
    """
    sub = activity[:, comp]
    bad = errors & ~sub.any(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalError(
            f"blocked record {idx} shares no component with the diagnosis, "
            "its likelihood is exactly zero",
            record_index=idx,
        )
    rows = np.column_stack([sub, errors])
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    masks = uniq[:, :-1].astype(float)
    failed = uniq[:, -1].astype(bool)
    return masks, failed, counts.astype(float)


def _loglik(masks, failed, counts, g) -> float:
    log_pi = masks @ np.log(g)
    # log1p(-1) for pass rows is discarded by the where(); silence it
    with np.errstate(divide="ignore"):
        fail_terms = np.log1p(-np.exp(log_pi))
    terms = np.where(failed, fail_terms, log_pi)
    return float(counts @ terms)


def _gradient(masks, failed, counts, g) -> np.ndarray:
    pi = np.exp(masks @ np.log(g))
    with np.errstate(divide="ignore", invalid="ignore"):
        fail_weights = -counts * pi / (1.0 - pi)
    weights = np.where(failed, fail_weights, counts)
    return (masks.T @ weights) / g


def log_likelihood(log: ObservationLog, components: Iterable[int], goodness: dict[int, float]) -> float:
    """Joint log-likelihood of the whole log under one diagnosis."""
    comp = sorted(set(int(c) for c in components))
    masks, failed, counts = _patterns(log.activity_matrix(), log.error_vector(), comp)
    g = np.array([goodness[c] for c in comp], dtype=float)
    return _loglik(masks, failed, counts, g)


def log_likelihood_gradient(
    log: ObservationLog, components: Iterable[int], goodness: dict[int, float]
) -> dict[int, float]:
    """Analytic gradient of log_likelihood with respect to each goodness value."""
    comp = sorted(set(int(c) for c in components))
    masks, failed, counts = _patterns(log.activity_matrix(), log.error_vector(), comp)
    g = np.array([goodness[c] for c in comp], dtype=float)
    grad = _gradient(masks, failed, counts, g)
    return {c: float(v) for c, v in zip(comp, grad)}


def _fit(masks, failed, counts, cfg: MleConfig, history: list[float] | None = None):
    k = masks.shape[1]
    lo, hi = cfg.g_clamp, 1.0 - cfg.g_clamp
    g = np.full(k, cfg.g_init)
    ll = _loglik(masks, failed, counts, g)
    if history is not None:
        history.append(ll)
    for _ in range(cfg.max_iters):
        grad = _gradient(masks, failed, counts, g)
        step = cfg.step_size
        accepted = None
        for _ in range(60):
            cand = np.clip(g + step * grad, lo, hi)
            cand_ll = _loglik(masks, failed, counts, cand)
            if cand_ll >= ll:
                accepted = (cand, cand_ll)
                break
            step *= 0.5
        if accepted is None:
            break
        gained = accepted[1] - ll
        g, ll = accepted
        if history is not None:
            history.append(ll)
        if gained <= cfg.stop_tol:
            break
    if not math.isfinite(ll):
        raise NumericalError("goodness fit left the finite domain")
    return g, ll


def fit_goodness(
    log: ObservationLog,
    components: Iterable[int],
    cfg: MleConfig | None = None,
    history: list[float] | None = None,
) -> tuple[dict[int, float], float]:
    """Maximum-likelihood goodness for one candidate diagnosis.

    Gradient ascent with backtracking (the step halves until the
    log-likelihood does not decrease), stopping once an accepted step gains
    at most stop_tol. Returns ({component: goodness}, log-likelihood); pass a
    list as `history` to capture the log-likelihood after every accepted
    step.
    """
    cfg = cfg if cfg is not None else MleConfig()
    comp = sorted(set(int(c) for c in components))
    if not comp:
        raise ValueError("cannot fit an empty diagnosis")
    masks, failed, counts = _patterns(log.activity_matrix(), log.error_vector(), comp)
    g, ll = _fit(masks, failed, counts, cfg, history)
    return dict(zip(comp, (float(v) for v in g))), ll


def _logsumexp(values: np.ndarray) -> float:
    peak = float(np.max(values))
    return peak + float(np.log(np.sum(np.exp(values - peak))))


def rank_diagnoses(
    candidates: Sequence[frozenset[int]],
    log: ObservationLog,
    prior_p: float = 0.01,
    mle: MleConfig | None = None,
) -> DiagnosticReport:
    """Fit every candidate and rank by posterior.

    posterior(d) is proportional to exp(fitted log-likelihood) times the
    independent-fault prior p**|d| * (1-p)**(M-|d|) with M the catalog size.
    Ties break toward smaller candidates, then lexicographic ids.
    """
    if not 0.0 < prior_p < 1.0:
        raise ValueError(f"prior_p must lie strictly inside (0, 1), got {prior_p}")
    if not candidates:
        return DiagnosticReport.empty()
    mle = mle if mle is not None else MleConfig()
    activity = log.activity_matrix()
    errors = log.error_vector()
    m_total = log.n
    log_p, log_q = math.log(prior_p), math.log1p(-prior_p)

    fitted = []
    scores = np.empty(len(candidates))
    for i, candidate in enumerate(candidates):
        comp = sorted(int(c) for c in candidate)
        if not comp:
            raise ValueError("candidate diagnoses must be non-empty")
        masks, failed, counts = _patterns(activity, errors, comp)
        g, ll = _fit(masks, failed, counts, mle)
        fitted.append((comp, g, ll))
        scores[i] = ll + len(comp) * log_p + (m_total - len(comp)) * log_q

    log_norm = _logsumexp(scores)
    posteriors = np.exp(scores - log_norm)
    diagnoses = [
        Diagnosis(
            components=frozenset(comp),
            goodness=tuple((c, float(v)) for c, v in zip(comp, g)),
            log_likelihood=float(ll),
            posterior=float(post),
        )
        for (comp, g, ll), post in zip(fitted, posteriors)
    ]
    diagnoses.sort(
        key=lambda d: (-d.posterior, len(d.components), tuple(sorted(d.components)))
    )
    return DiagnosticReport(tuple(diagnoses), float(math.exp(log_norm)), float(log_norm))


def report_to_csv(report: DiagnosticReport, out) -> None:
    """Write `rank,posterior,components,goodness` rows to a text stream."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["rank", "posterior", "components", "goodness"])
    for rank, diag in enumerate(report.diagnoses, start=1):
        comp = sorted(diag.components)
        lookup = diag.goodness_map()
        writer.writerow(
            [
                rank,
                repr(diag.posterior),
                ";".join(str(c) for c in comp),
                ";".join(repr(lookup[c]) for c in comp),
            ]
        )


def report_to_csv_text(report: DiagnosticReport) -> str:
    buf = io.StringIO()
    report_to_csv(report, buf)
    return buf.getvalue()
