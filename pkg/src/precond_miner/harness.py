"""Benchmark harness: seeded simulation sweeps and CSV reporting.

Two study shapes. The noiseless benchmark sweeps the defect-budget guess
d_hat, running the generalized-binary-splitting search (plus residual
recovery) and the repeated-binary-splitting baseline on the same fresh
instances, to show where the budgeted search stops paying off. The noisy
benchmark sweeps dilution-noise levels (mu, sigma) and runs the adaptive
epsilon-greedy search, recording a per-test trace of recall/precision.

Everything is driven by one master seed. Per-run streams derive from numpy
SeedSequence spawn keys (repetition, stream role), so repetitions are
independent, order-insensitive, and bit-exactly replayable. Sweep cells
share those streams on purpose (common random numbers): repetition k sees
the same truth placement, base noise draws, oracle stream, and search seed
in every cell, so a sweep isolates the cell parameter instead of burying it
under instance-to-instance variance. run_meta.json echoes the seed and the
RNG algorithm. CSV output contains no wall-clock fields, so a rerun with
the same config and seed is byte identical (per-run wall times stay on the
in-memory rows only).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .adaptive import AdaptiveConfig, TraceRow, run_adaptive_barinel
from .errors import ConfigError
from .model import NecessarySet, recall_precision, synthetic_catalog
from .oracle import (
    RNG_ALGORITHM,
    GaussianNoiseSpec,
    NoiseProfile,
    ProblemInstance,
    SimulatedOracle,
    make_rng,
    sample_noise_profile,
)
from .splitting import SplitSearchConfig, find_necessary_conditions, repeated_binary_splitting

ALGO_SPLIT = "gbs-residual"
ALGO_BASELINE = "repeated-binary-splitting"
ALGO_ADAPTIVE = "adaptive-barinel"

MODE_NOISELESS = "noiseless"
MODE_NOISY = "noisy"

ORACLE_SIM = "sim"

_ROLE_TRUTH = 0
_ROLE_NOISE = 1
_ROLE_ORACLE = 2
_ROLE_SEARCH = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark run, as parsed from a flat key = value config file."""

    mode: str
    n: int = 642
    oracle: str = ORACLE_SIM
    d_true: int | None = None
    d_hat_sweep: tuple[int, ...] = ()
    noise_sweep: tuple[tuple[float, float], ...] = ()
    reps: int = 1
    seed: int = 0
    outdir: str = "out"
    d_hat: int | None = None
    epsilon0: float = 0.9
    decay: float = 0.995
    epsilon_min: float = 0.1
    bootstrap_len: int = 30
    decode_freq: int = 10
    max_iters: int = 4000
    convergence_window: int = 3
    confirm_count: int = 2
    staccato_cap: int = 100
    prior_p: float = 0.01

    def __post_init__(self):
        if self.mode not in (MODE_NOISELESS, MODE_NOISY):
            raise ConfigError(f"mode must be {MODE_NOISELESS} or {MODE_NOISY}, got {self.mode!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        external = self.oracle != ORACLE_SIM
        if external and not self.oracle.startswith("external:tcp://"):
            raise ConfigError(
                f"oracle must be {ORACLE_SIM!r} or 'external:tcp://host:port', got {self.oracle!r}"
            )
        if not external and self.d_true is None:
            raise ConfigError("sim oracle requires d_true")
        if external and self.noise_sweep:
            raise ConfigError("an external oracle brings its own noise; drop noise_sweep")
        if self.d_true is not None and not 0 <= self.d_true <= self.n:
            raise ConfigError(f"d_true must lie in [0, n], got {self.d_true}")
        if self.mode == MODE_NOISELESS and not self.d_hat_sweep:
            raise ConfigError("noiseless mode needs a d_hat_sweep")
        if self.mode == MODE_NOISY and not self.noise_sweep:
            raise ConfigError("noisy mode needs a noise_sweep")
        for d_hat in self.d_hat_sweep:
            if d_hat < 1:
                raise ConfigError(f"d_hat values must be at least 1, got {d_hat}")
        for mu, sigma in self.noise_sweep:
            if sigma < 0:
                raise ConfigError(f"noise sigma must be non-negative, got {sigma}")

    @property
    def external_address(self) -> str | None:
        if self.oracle == ORACLE_SIM:
            return None
        return self.oracle[len("external:") :]

    def adaptive_config(self, d_hat: int, rng_seed: int) -> AdaptiveConfig:
        return AdaptiveConfig(
            d_hat=d_hat,
            epsilon0=self.epsilon0,
            decay=self.decay,
            epsilon_min=self.epsilon_min,
            bootstrap_len=self.bootstrap_len,
            decode_freq=self.decode_freq,
            max_iters=self.max_iters,
            convergence_window=self.convergence_window,
            confirm_count=self.confirm_count,
            staccato_cap=self.staccato_cap,
            prior_p=self.prior_p,
            rng_seed=rng_seed,
        )


_INT_KEYS = {
    "n",
    "d_true",
    "reps",
    "seed",
    "d_hat",
    "bootstrap_len",
    "decode_freq",
    "max_iters",
    "convergence_window",
    "confirm_count",
    "staccato_cap",
}
_FLOAT_KEYS = {"epsilon0", "decay", "epsilon_min", "prior_p"}
_STR_KEYS = {"mode", "oracle", "outdir"}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat `key = value` format; unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} needs an integer, got {value!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} needs a number, got {value!r}") from None
        elif key in _STR_KEYS:
            values[key] = value
        elif key == "d_hat_sweep":
            try:
                values[key] = tuple(int(tok) for tok in value.split(",") if tok.strip())
            except ValueError:
                raise ConfigError(f"line {lineno}: bad d_hat_sweep {value!r}") from None
        elif key == "noise_sweep":
            cells = []
            for tok in value.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                mu, sep, sigma = tok.partition(":")
                if not sep:
                    raise ConfigError(f"line {lineno}: noise cells look like mu:sigma, got {tok!r}")
                try:
                    cells.append((float(mu), float(sigma)))
                except ValueError:
                    raise ConfigError(f"line {lineno}: bad noise cell {tok!r}") from None
            values[key] = tuple(cells)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if "mode" not in values:
        raise ConfigError("config must set mode")
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def derive_seed(master: int, rep: int, role: int) -> int:
    """Deterministic 64-bit stream seed from (master, repetition, role)."""
    seq = np.random.SeedSequence(entropy=master, spawn_key=(rep, role))
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def random_truth(n: int, d: int, seed: int) -> NecessarySet:
    """Uniformly placed necessary set of size d."""
    if not 0 <= d <= n:
        raise ValueError(f"d must lie in [0, n], got {d}")
    rng = make_rng(seed)
    ids = rng.choice(n, size=d, replace=False)
    return NecessarySet.from_ids((int(i) for i in ids), n)


def make_instance(
    n: int, d: int, master: int, rep: int, noise: tuple[float, float] | None = None
) -> ProblemInstance:
    """Simulated target for one repetition.

    The noise parameters shape the dilution draws but do not enter the seed,
    so repetition k is the same instance (truth, base noise normals, oracle
    stream) in every cell of a noise sweep.
    """
    truth = random_truth(n, d, derive_seed(master, rep, _ROLE_TRUTH))
    if noise is None:
        profile = NoiseProfile.zero(n)
    else:
        mu, sigma = noise
        profile = sample_noise_profile(
            GaussianNoiseSpec(mu, sigma, derive_seed(master, rep, _ROLE_NOISE)), n
        )
    return ProblemInstance(
        catalog=synthetic_catalog(n),
        truth=truth,
        noise=profile,
        rng_seed=derive_seed(master, rep, _ROLE_ORACLE),
    )


@dataclass(frozen=True)
class ExperimentRow:
    """One algorithm run. wall_time never reaches the CSVs (determinism)."""

    mode: str
    algorithm: str
    n: int
    d_true: int
    d_hat: int
    mu: float | None
    sigma: float | None
    rep: int
    seed: int
    tests_used: int
    recall: float
    precision: float
    exact_recovery: bool
    wall_time: float
    first_full_recall: int | None = None


@dataclass(frozen=True)
class NoisyTrace:
    """Per-test trace of one adaptive run."""

    mu: float
    sigma: float
    rep: int
    rows: tuple[TraceRow, ...]


def run_noiseless_benchmark(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Sweep d_hat; per (cell, rep) run the budgeted search and the baseline."""
    if cfg.mode != MODE_NOISELESS:
        raise ConfigError(f"expected a noiseless config, got mode {cfg.mode!r}")
    if cfg.external_address is not None:
        raise ConfigError("the noiseless benchmark runs against the simulated oracle")
    rows: list[ExperimentRow] = []
    items = range(cfg.n)
    assert cfg.d_true is not None
    for d_hat in cfg.d_hat_sweep:
        for rep in range(cfg.reps):
            # Paired across d_hat cells: same instance per rep (see module docstring).
            instance = make_instance(cfg.n, cfg.d_true, cfg.seed, rep)
            run_seed = derive_seed(cfg.seed, rep, _ROLE_SEARCH)
            truth_ids = frozenset(instance.truth.ids)

            start = time.perf_counter()
            result = find_necessary_conditions(items, SplitSearchConfig(d_hat), SimulatedOracle(instance))
            split_wall = time.perf_counter() - start
            metrics = recall_precision(result.defectives, instance.truth, result.tests_used)
            rows.append(
                ExperimentRow(
                    mode=cfg.mode,
                    algorithm=ALGO_SPLIT,
                    n=cfg.n,
                    d_true=cfg.d_true,
                    d_hat=d_hat,
                    mu=None,
                    sigma=None,
                    rep=rep,
                    seed=run_seed,
                    tests_used=result.tests_used,
                    recall=metrics.recall,
                    precision=metrics.precision,
                    exact_recovery=result.defectives == truth_ids,
                    wall_time=split_wall,
                )
            )

            start = time.perf_counter()
            found, tests = repeated_binary_splitting(items, cfg.d_true, SimulatedOracle(instance))
            base_wall = time.perf_counter() - start
            metrics = recall_precision(found, instance.truth, tests)
            rows.append(
                ExperimentRow(
                    mode=cfg.mode,
                    algorithm=ALGO_BASELINE,
                    n=cfg.n,
                    d_true=cfg.d_true,
                    d_hat=d_hat,
                    mu=None,
                    sigma=None,
                    rep=rep,
                    seed=run_seed,
                    tests_used=tests,
                    recall=metrics.recall,
                    precision=metrics.precision,
                    exact_recovery=found == truth_ids,
                    wall_time=base_wall,
                )
            )
    return rows


def run_noisy_benchmark(cfg: ExperimentConfig) -> tuple[list[ExperimentRow], list[NoisyTrace]]:
    """Sweep noise cells; per (cell, rep) run the adaptive search with truth metrics."""
    if cfg.mode != MODE_NOISY:
        raise ConfigError(f"expected a noisy config, got mode {cfg.mode!r}")
    if cfg.external_address is not None:
        raise ConfigError("the noisy benchmark runs against the simulated oracle")
    rows: list[ExperimentRow] = []
    traces: list[NoisyTrace] = []
    assert cfg.d_true is not None
    d_hat = cfg.d_hat if cfg.d_hat is not None else max(cfg.d_true, 1)
    universe = range(cfg.n)
    for mu, sigma in cfg.noise_sweep:
        for rep in range(cfg.reps):
            # Paired across noise cells: only (mu, sigma) varies per rep.
            instance = make_instance(cfg.n, cfg.d_true, cfg.seed, rep, noise=(mu, sigma))
            run_seed = derive_seed(cfg.seed, rep, _ROLE_SEARCH)
            acfg = cfg.adaptive_config(d_hat, run_seed)
            start = time.perf_counter()
            result = run_adaptive_barinel(universe, acfg, SimulatedOracle(instance), instance.truth)
            wall = time.perf_counter() - start
            final = recall_precision(result.suspected, instance.truth, result.log.N)
            first_full = next(
                (row.tests_used for row in result.trace if row.recall == 1.0), None
            )
            rows.append(
                ExperimentRow(
                    mode=cfg.mode,
                    algorithm=ALGO_ADAPTIVE,
                    n=cfg.n,
                    d_true=cfg.d_true,
                    d_hat=d_hat,
                    mu=mu,
                    sigma=sigma,
                    rep=rep,
                    seed=run_seed,
                    tests_used=result.log.N,
                    recall=final.recall,
                    precision=final.precision,
                    exact_recovery=final.recall == 1.0 and final.precision == 1.0,
                    wall_time=wall,
                    first_full_recall=first_full,
                )
            )
            traces.append(NoisyTrace(mu=mu, sigma=sigma, rep=rep, rows=result.trace))
    return rows, traces


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


_ROW_COLUMNS = (
    "mode",
    "algorithm",
    "n",
    "d_true",
    "d_hat",
    "mu",
    "sigma",
    "rep",
    "seed",
    "tests_used",
    "recall",
    "precision",
    "exact_recovery",
    "first_full_recall",
)

_TRACE_COLUMNS = (
    "mu",
    "sigma",
    "rep",
    "iteration",
    "epsilon",
    "mode",
    "outcome",
    "recall",
    "precision",
    "tests_used",
)

_SUMMARY_COLUMNS = (
    "mode",
    "algorithm",
    "n",
    "d_true",
    "d_hat",
    "mu",
    "sigma",
    "reps",
    "mean_tests",
    "std_tests",
    "mean_recall",
    "mean_precision",
    "exact_rate",
    "median_first_full_recall",
)


def _write_csv(path: Path, header: Sequence[str], data_rows: Iterable[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in data_rows:
            writer.writerow([_fmt(v) for v in row])


def summarize(rows: Sequence[ExperimentRow]) -> list[dict]:
    """Per-cell aggregates; cells keep their first-seen order."""
    cells: dict[tuple, list[ExperimentRow]] = {}
    for row in rows:
        key = (row.mode, row.algorithm, row.n, row.d_true, row.d_hat, row.mu, row.sigma)
        cells.setdefault(key, []).append(row)
    out = []
    for key, members in cells.items():
        tests = np.array([r.tests_used for r in members], dtype=float)
        first = [r.first_full_recall for r in members if r.first_full_recall is not None]
        out.append(
            {
                "mode": key[0],
                "algorithm": key[1],
                "n": key[2],
                "d_true": key[3],
                "d_hat": key[4],
                "mu": key[5],
                "sigma": key[6],
                "reps": len(members),
                "mean_tests": float(tests.mean()),
                "std_tests": float(tests.std()),
                "mean_recall": float(np.mean([r.recall for r in members])),
                "mean_precision": float(np.mean([r.precision for r in members])),
                "exact_rate": float(np.mean([1.0 if r.exact_recovery else 0.0 for r in members])),
                "median_first_full_recall": float(np.median(first)) if first else None,
            }
        )
    return out


def emit_report(
    rows: Sequence[ExperimentRow],
    traces: Sequence[NoisyTrace],
    outdir: str | Path,
    cfg: ExperimentConfig,
) -> dict[str, Path]:
    """Write noiseless.csv, noisy_traces.csv, summary.csv and run_meta.json."""
    if not rows:
        raise ValueError("nothing to report: rows is empty")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    paths = {
        "noiseless": out / "noiseless.csv",
        "traces": out / "noisy_traces.csv",
        "summary": out / "summary.csv",
        "meta": out / "run_meta.json",
    }

    noiseless_rows = [r for r in rows if r.mode == MODE_NOISELESS]
    _write_csv(
        paths["noiseless"],
        _ROW_COLUMNS,
        ([getattr(r, col) for col in _ROW_COLUMNS] for r in noiseless_rows),
    )

    def trace_rows():
        for trace in traces:
            for row in trace.rows:
                yield (
                    trace.mu,
                    trace.sigma,
                    trace.rep,
                    row.iteration,
                    row.epsilon,
                    row.mode,
                    row.outcome.value,
                    row.recall,
                    row.precision,
                    row.tests_used,
                )

    _write_csv(paths["traces"], _TRACE_COLUMNS, trace_rows())

    summary = summarize(rows)
    _write_csv(
        paths["summary"],
        _SUMMARY_COLUMNS,
        ([cell[col] for col in _SUMMARY_COLUMNS] for cell in summary),
    )

    config_echo = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    config_echo["d_hat_sweep"] = list(cfg.d_hat_sweep)
    config_echo["noise_sweep"] = [list(cell) for cell in cfg.noise_sweep]
    meta = {
        "package_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "seed": cfg.seed,
        "seed_split_rule": (
            "SeedSequence(master, spawn_key=(repetition, role)); "
            "sweep cells share streams (common random numbers)"
        ),
        "iteration_axis": "tests issued, bootstrap included",
        "config": config_echo,
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
