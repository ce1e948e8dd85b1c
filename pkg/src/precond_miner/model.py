"""Core domain types: condition catalogs, test specs, observation logs, metrics.

A *condition* is one togglable fact about the target environment (a package
version, an open port, a disabled mitigation, ...). A test hardens a chosen
subset of conditions and reruns the exploit once; the attempt either still
succeeds or is blocked. Everything downstream (group-testing searches, the
Bayesian decoder, the benchmark harness) works in terms of the types defined
here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CONDITION_GROUPS = (
    "access-control",
    "connectivity",
    "services",
    "safeguards",
    "packages",
    "other",
)

CATALOG_HEADER = "#precond-catalog v1"
LOG_HEADER_TYPE = "observation-log"
LOG_VERSION = 1


class TestOutcome(Enum):
    """Result of one hardened exploit attempt.

    BLOCKED means the attempt failed, so the disabled set must contain at
    least one condition the exploit needs. EXPLOITED means the attempt still
    succeeded. In diagnosis terms BLOCKED rows are the failing observations
    and EXPLOITED rows the passing ones.
    """

    BLOCKED = "blocked"
    EXPLOITED = "exploited"

    __test__ = False  # not a pytest class, despite the name


def _frozen_bool_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=bool)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D boolean vector, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ConditionDescriptor:
    """One catalog entry."""

    id: int
    label: str
    group: str = "other"

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"condition id must be non-negative, got {self.id}")
        # the catalog file format is line-based, so a label must survive line
        # splitting intact (this also catches NEL, form feeds, the unicode
        # separators, and trailing newlines)
        if self.label.splitlines() != [self.label]:
            raise ValueError(f"bad condition label {self.label!r}")
        if self.group not in CONDITION_GROUPS:
            raise ValueError(f"unknown condition group {self.group!r}")


@dataclass(frozen=True)
class ConditionCatalog:
    """The universe of togglable conditions, with dense 0-based ids."""

    conditions: tuple[ConditionDescriptor, ...]

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        for expect, cond in enumerate(self.conditions):
            if cond.id != expect:
                raise ValueError(
                    f"catalog ids must be dense and ordered: position {expect} has id {cond.id}"
                )
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            raise ValueError(f"duplicate condition labels: {dupes}")

    @property
    def n(self) -> int:
        return len(self.conditions)

    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.conditions)

    def to_text(self) -> str:
        lines = [CATALOG_HEADER]
        lines.extend(f"{c.id},{c.group},{c.label}" for c in self.conditions)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConditionCatalog":
        lines = text.splitlines()
        body = [ln for ln in lines if ln.strip()]
        if not body or body[0].strip() != CATALOG_HEADER:
            raise ValueError(f"catalog file must start with {CATALOG_HEADER!r}")
        conditions = []
        for lineno, line in enumerate(body[1:], start=2):
            parts = line.split(",", 2)
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'id,group,label', got {line!r}")
            raw_id, group, label = parts
            try:
                cid = int(raw_id.strip())
            except ValueError:
                raise ValueError(f"line {lineno}: bad condition id {raw_id!r}") from None
            conditions.append(ConditionDescriptor(cid, label, group.strip()))
        return cls(tuple(conditions))

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_file(cls, path: str | Path) -> "ConditionCatalog":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def synthetic_catalog(n: int) -> ConditionCatalog:
    """Generated catalog for simulation studies; groups cycle for variety."""
    if n < 1:
        raise ValueError(f"catalog size must be positive, got {n}")
    return ConditionCatalog(
        tuple(
            ConditionDescriptor(i, f"cond-{i:04d}", CONDITION_GROUPS[i % len(CONDITION_GROUPS)])
            for i in range(n)
        )
    )


@dataclass(frozen=True, eq=False)
class NecessarySet:
    """Ground-truth flags marking which conditions the exploit needs."""

    flags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flags", _frozen_bool_vector(self.flags, "flags"))
        object.__setattr__(self, "ids", tuple(int(i) for i in np.flatnonzero(self.flags)))

    @classmethod
    def from_ids(cls, ids: Iterable[int], n: int) -> "NecessarySet":
        flags = np.zeros(n, dtype=bool)
        for i in ids:
            if not 0 <= i < n:
                raise ValueError(f"condition id {i} out of range for n={n}")
            flags[i] = True
        return cls(flags)

    @property
    def n(self) -> int:
        return len(self.flags)

    @property
    def d(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NecessarySet):
            return NotImplemented
        return np.array_equal(self.flags, other.flags)


@dataclass(frozen=True, eq=False)
class TestSpec:
    """One hardened configuration: disabled[j] is True when condition j is hardened."""

    disabled: np.ndarray

    __test__ = False

    def __post_init__(self):
        object.__setattr__(self, "disabled", _frozen_bool_vector(self.disabled, "disabled"))
        object.__setattr__(
            self, "disabled_ids", tuple(int(i) for i in np.flatnonzero(self.disabled))
        )

    @property
    def n(self) -> int:
        return len(self.disabled)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TestSpec):
            return NotImplemented
        return np.array_equal(self.disabled, other.disabled)


def spec_disabling(n: int, ids: Iterable[int]) -> TestSpec:
    disabled = np.zeros(n, dtype=bool)
    for i in ids:
        if not 0 <= i < n:
            raise ValueError(f"condition id {i} out of range for n={n}")
        disabled[i] = True
    return TestSpec(disabled)


@dataclass(frozen=True, eq=False)
class TestRecord:
    """One issued test and its outcome, in issue order."""

    spec: TestSpec
    outcome: TestOutcome
    sequence_number: int

    __test__ = False

    def __post_init__(self):
        if self.sequence_number < 0:
            raise ValueError("sequence_number must be non-negative")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TestRecord):
            return NotImplemented
        return (
            self.sequence_number == other.sequence_number
            and self.outcome is other.outcome
            and self.spec == other.spec
        )


@dataclass(frozen=True, eq=False)
class ObservationLog:
    """An ordered batch of test records over a fixed catalog size."""

    records: tuple[TestRecord, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.n < 1:
            raise ValueError(f"catalog size must be positive, got {self.n}")
        for idx, rec in enumerate(self.records):
            if rec.spec.n != self.n:
                raise ValueError(
                    f"record {idx} has spec length {rec.spec.n}, expected {self.n}"
                )
            if rec.sequence_number != idx:
                raise ValueError(
                    f"record {idx} has sequence_number {rec.sequence_number}"
                )

    @property
    def N(self) -> int:
        return len(self.records)

    def activity_matrix(self) -> np.ndarray:
        """N x n boolean matrix; row i marks the conditions disabled by test i."""
        if not self.records:
            return np.zeros((0, self.n), dtype=bool)
        return np.array([rec.spec.disabled for rec in self.records], dtype=bool)

    def error_vector(self) -> np.ndarray:
        """Boolean vector, True where the exploit was blocked."""
        return np.array([rec.outcome is TestOutcome.BLOCKED for rec in self.records], dtype=bool)

    def to_lines(self) -> list[str]:
        head = {"type": LOG_HEADER_TYPE, "version": LOG_VERSION, "n": self.n}
        lines = [json.dumps(head, sort_keys=True)]
        for rec in self.records:
            lines.append(
                json.dumps(
                    {
                        "seq": rec.sequence_number,
                        "disable": list(rec.spec.disabled_ids),
                        "outcome": rec.outcome.value,
                    },
                    sort_keys=True,
                )
            )
        return lines

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "ObservationLog":
        it = iter(ln for ln in lines if ln.strip())
        try:
            head = json.loads(next(it))
        except StopIteration:
            raise ValueError("empty observation log") from None
        if not isinstance(head, dict) or head.get("type") != LOG_HEADER_TYPE:
            raise ValueError(f"observation log must start with a {LOG_HEADER_TYPE} header")
        if head.get("version") != LOG_VERSION:
            raise ValueError(f"unsupported log version {head.get('version')!r}")
        n = head.get("n")
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"bad catalog size in log header: {n!r}")
        records = []
        for idx, line in enumerate(it):
            row = json.loads(line)
            outcome = TestOutcome(row["outcome"])
            records.append(TestRecord(spec_disabling(n, row["disable"]), outcome, idx))
        return cls(tuple(records), n)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ObservationLog":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservationLog):
            return NotImplemented
        return self.n == other.n and self.records == other.records


@dataclass(frozen=True)
class Metrics:
    recall: float
    precision: float
    tests_used: int = 0

    def __post_init__(self):
        if not 0.0 <= self.recall <= 1.0:
            raise ValueError(f"recall out of range: {self.recall}")
        if not 0.0 <= self.precision <= 1.0:
            raise ValueError(f"precision out of range: {self.precision}")
        if self.tests_used < 0:
            raise ValueError("tests_used must be non-negative")


def recall_precision(estimate: Iterable[int], truth: NecessarySet, tests_used: int = 0) -> Metrics:
    """Score an estimated necessary set against ground truth.

    Empty truth makes recall vacuously 1.0 and an empty estimate makes
    precision vacuously 1.0, so curves start sane at iteration zero.
    """
    est = set(int(i) for i in estimate)
    for i in est:
        if not 0 <= i < truth.n:
            raise ValueError(f"estimated id {i} out of range for n={truth.n}")
    true_ids = set(truth.ids)
    hit = len(est & true_ids)
    recall = 1.0 if not true_ids else hit / len(true_ids)
    precision = 1.0 if not est else hit / len(est)
    return Metrics(recall=recall, precision=precision, tests_used=tests_used)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


def validate_instance(catalog: ConditionCatalog, truth: NecessarySet) -> ValidationResult:
    """Cross-check a catalog/truth pair before running a study against it."""
    violations: list[str] = []
    if truth.n != catalog.n:
        violations.append(
            f"truth vector length {truth.n} does not match catalog size {catalog.n}"
        )
    seen_labels: set[str] = set()
    for pos, cond in enumerate(catalog.conditions):
        if cond.id != pos:
            violations.append(f"catalog position {pos} has id {cond.id}")
        if cond.label in seen_labels:
            violations.append(f"duplicate label {cond.label!r}")
        seen_labels.add(cond.label)
        if cond.group not in CONDITION_GROUPS:
            violations.append(f"condition {cond.id} has unknown group {cond.group!r}")
    return ValidationResult(ok=not violations, violations=tuple(violations))
