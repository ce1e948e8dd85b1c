import json
from dataclasses import replace

import pytest

from precond_miner import (
    ConfigError,
    ExperimentConfig,
    ExperimentRow,
    derive_seed,
    emit_report,
    load_config,
    make_instance,
    parse_config_text,
    random_truth,
    run_noiseless_benchmark,
    run_noisy_benchmark,
    summarize,
)
from precond_miner.harness import ALGO_BASELINE, ALGO_SPLIT

FULL_CONFIG = """
# exercise every key
mode = noisy
n = 64
oracle = sim
d_true = 3
noise_sweep = 0.05:0.05, 0.2:0.05
reps = 4
seed = 99
outdir = results
d_hat = 3
epsilon0 = 0.8
decay = 0.99
epsilon_min = 0.2
bootstrap_len = 12
decode_freq = 5
max_iters = 500
convergence_window = 2
confirm_count = 1
staccato_cap = 50
prior_p = 0.02
"""


def strip_wall_time(rows):
    return [replace(r, wall_time=0.0) for r in rows]


def test_parse_full_config():
    cfg = parse_config_text(FULL_CONFIG)
    assert cfg == ExperimentConfig(
        mode="noisy",
        n=64,
        oracle="sim",
        d_true=3,
        noise_sweep=((0.05, 0.05), (0.2, 0.05)),
        reps=4,
        seed=99,
        outdir="results",
        d_hat=3,
        epsilon0=0.8,
        decay=0.99,
        epsilon_min=0.2,
        bootstrap_len=12,
        decode_freq=5,
        max_iters=500,
        convergence_window=2,
        confirm_count=1,
        staccato_cap=50,
        prior_p=0.02,
    )


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mode = noiseless\nd_true = 1\nd_hat_sweep = 1, 2\n")
    cfg = load_config(path)
    assert cfg.d_hat_sweep == (1, 2)
    assert cfg.n == 642  # default


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("n = 5", "must set mode"),
        ("mode = noiseless\nfoo = 1", "unknown key"),
        ("mode = noiseless\nmode = noisy", "duplicate key"),
        ("mode = noiseless\njust words", "expected 'key = value'"),
        ("mode = noiseless\nn = many", "needs an integer"),
        ("mode = noisy\nepsilon0 = big", "needs a number"),
        ("mode = noiseless\nd_hat_sweep = 1;2", "bad d_hat_sweep"),
        ("mode = noisy\nnoise_sweep = 0.1", "look like mu:sigma"),
        ("mode = noisy\nnoise_sweep = a:b", "bad noise cell"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(mode="banana"), "mode must be"),
        (dict(mode="noiseless", n=0, d_true=0, d_hat_sweep=(1,)), "n must be positive"),
        (dict(mode="noiseless", d_true=1, d_hat_sweep=(1,), reps=0), "reps"),
        (dict(mode="noiseless", oracle="http://x", d_hat_sweep=(1,)), "oracle must be"),
        (dict(mode="noiseless", d_hat_sweep=(1,)), "requires d_true"),
        (
            dict(mode="noiseless", oracle="external:tcp://h:1", d_hat_sweep=(1,), noise_sweep=((0.1, 0.1),)),
            "its own noise",
        ),
        (dict(mode="noiseless", d_true=99, n=10, d_hat_sweep=(1,)), "d_true must lie"),
        (dict(mode="noiseless", d_true=1), "needs a d_hat_sweep"),
        (dict(mode="noisy", d_true=1), "needs a noise_sweep"),
        (dict(mode="noiseless", d_true=1, d_hat_sweep=(0,)), "at least 1"),
        (dict(mode="noisy", d_true=1, noise_sweep=((0.1, -0.5),)), "sigma"),
    ],
)
def test_config_validation(kwargs, fragment):
    with pytest.raises(ConfigError, match=fragment):
        ExperimentConfig(**kwargs)


def test_external_address_property():
    sim = ExperimentConfig(mode="noiseless", d_true=1, d_hat_sweep=(1,))
    assert sim.external_address is None
    ext = ExperimentConfig(
        mode="noiseless", oracle="external:tcp://box:7000", d_hat_sweep=(2,)
    )
    assert ext.external_address == "tcp://box:7000"


def test_adaptive_config_carries_knobs():
    cfg = parse_config_text(FULL_CONFIG)
    acfg = cfg.adaptive_config(d_hat=3, rng_seed=123)
    assert acfg.d_hat == 3
    assert acfg.rng_seed == 123
    assert acfg.epsilon0 == 0.8
    assert acfg.bootstrap_len == 12
    assert acfg.staccato_cap == 50


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(42, 0, 0) == derive_seed(42, 0, 0)
    seen = {derive_seed(master, rep, role) for master in (0, 1) for rep in range(4) for role in range(4)}
    assert len(seen) == 32
    assert all(0 <= s < 2**64 for s in seen)


def test_random_truth():
    truth = random_truth(50, 5, seed=1)
    assert truth.n == 50 and truth.d == 5
    assert random_truth(50, 5, seed=1) == truth
    assert random_truth(50, 0, seed=1).ids == ()
    with pytest.raises(ValueError):
        random_truth(5, 6, seed=1)


def test_make_instance_pairs_noise_cells():
    # same rep, different cell: identical instance except for the dilution rates
    low = make_instance(64, 3, master=7, rep=2, noise=(0.05, 0.05))
    high = make_instance(64, 3, master=7, rep=2, noise=(0.30, 0.05))
    assert low.truth == high.truth
    assert low.rng_seed == high.rng_seed
    assert tuple(low.noise.epsilons) != tuple(high.noise.epsilons)
    # different rep: a fresh instance
    other = make_instance(64, 3, master=7, rep=3, noise=(0.05, 0.05))
    assert other.truth != low.truth

    bare = make_instance(64, 3, master=7, rep=2)
    assert bare.noise.is_noiseless
    assert bare.truth == low.truth


def tiny_noiseless_config(**overrides):
    base = dict(mode="noiseless", n=16, d_true=2, d_hat_sweep=(2, 4), reps=2, seed=7)
    base.update(overrides)
    return ExperimentConfig(**base)


def test_noiseless_benchmark_rows():
    rows = run_noiseless_benchmark(tiny_noiseless_config())
    assert len(rows) == 8  # 2 cells x 2 reps x 2 algorithms
    assert all(r.exact_recovery for r in rows)
    assert all(r.recall == 1.0 and r.precision == 1.0 for r in rows)
    assert all(r.mu is None and r.sigma is None for r in rows)

    # the baseline ignores d_hat, and pairing reuses the instance, so the
    # baseline cost for rep k must repeat exactly across cells
    base = {(r.d_hat, r.rep): r.tests_used for r in rows if r.algorithm == ALGO_BASELINE}
    assert base[(2, 0)] == base[(4, 0)]
    assert base[(2, 1)] == base[(4, 1)]

    again = run_noiseless_benchmark(tiny_noiseless_config())
    assert strip_wall_time(again) == strip_wall_time(rows)


def test_noiseless_benchmark_rejects_wrong_mode():
    noisy = ExperimentConfig(mode="noisy", n=16, d_true=1, noise_sweep=((0.1, 0.05),))
    with pytest.raises(ConfigError, match="noiseless config"):
        run_noiseless_benchmark(noisy)
    with pytest.raises(ConfigError, match="noisy config"):
        run_noisy_benchmark(tiny_noiseless_config())
    external = ExperimentConfig(
        mode="noiseless", oracle="external:tcp://h:1", d_hat_sweep=(1,)
    )
    with pytest.raises(ConfigError, match="simulated oracle"):
        run_noiseless_benchmark(external)


def tiny_noisy_config(**overrides):
    base = dict(
        mode="noisy",
        n=24,
        d_true=2,
        noise_sweep=((0.05, 0.02),),
        reps=2,
        seed=11,
        bootstrap_len=10,
        decode_freq=5,
        max_iters=400,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_noisy_benchmark_smoke():
    rows, traces = run_noisy_benchmark(tiny_noisy_config())
    assert len(rows) == 2 and len(traces) == 2
    for row, trace in zip(rows, traces):
        assert row.tests_used == len(trace.rows)
        assert (row.mu, row.sigma, row.rep) == (trace.mu, trace.sigma, trace.rep)
        assert row.precision == 1.0 and row.recall == 1.0
        assert row.first_full_recall is not None
        assert row.first_full_recall <= row.tests_used
    rows_again, _ = run_noisy_benchmark(tiny_noisy_config())
    assert strip_wall_time(rows_again) == strip_wall_time(rows)


def fake_row(**overrides):
    base = dict(
        mode="noiseless",
        algorithm=ALGO_SPLIT,
        n=16,
        d_true=2,
        d_hat=2,
        mu=None,
        sigma=None,
        rep=0,
        seed=1,
        tests_used=10,
        recall=1.0,
        precision=1.0,
        exact_recovery=True,
        wall_time=0.5,
    )
    base.update(overrides)
    return ExperimentRow(**base)


def test_summarize_math():
    rows = [
        fake_row(rep=0, tests_used=10),
        fake_row(rep=1, tests_used=14, recall=0.5, exact_recovery=False),
        fake_row(algorithm=ALGO_BASELINE, rep=0, tests_used=30),
    ]
    cells = summarize(rows)
    assert [c["algorithm"] for c in cells] == [ALGO_SPLIT, ALGO_BASELINE]
    split = cells[0]
    assert split["reps"] == 2
    assert split["mean_tests"] == pytest.approx(12.0, abs=1e-12)
    assert split["std_tests"] == pytest.approx(2.0, abs=1e-12)  # population std
    assert split["mean_recall"] == pytest.approx(0.75, abs=1e-12)
    assert split["exact_rate"] == pytest.approx(0.5, abs=1e-12)
    assert split["median_first_full_recall"] is None


def test_summarize_median_skips_missing():
    rows = [
        fake_row(mode="noisy", rep=0, first_full_recall=40),
        fake_row(mode="noisy", rep=1, first_full_recall=100),
        fake_row(mode="noisy", rep=2, first_full_recall=None),
    ]
    (cell,) = summarize(rows)
    assert cell["median_first_full_recall"] == pytest.approx(70.0)


def read_bytes(paths):
    return {name: path.read_bytes() for name, path in paths.items()}


def test_emit_report_is_byte_deterministic(tmp_path):
    cfg = tiny_noisy_config()
    rows, traces = run_noisy_benchmark(cfg)
    first = emit_report(rows, traces, tmp_path / "a", cfg)
    second = emit_report(rows, traces, tmp_path / "b", cfg)
    assert read_bytes(first) == read_bytes(second)

    header = (tmp_path / "a" / "noisy_traces.csv").read_text().splitlines()[0]
    assert header == "mu,sigma,rep,iteration,epsilon,mode,outcome,recall,precision,tests_used"
    n_trace_lines = sum(len(t.rows) for t in traces)
    assert len((tmp_path / "a" / "noisy_traces.csv").read_text().splitlines()) == 1 + n_trace_lines


def test_emit_report_layout(tmp_path):
    cfg = tiny_noiseless_config()
    rows = run_noiseless_benchmark(cfg)
    paths = emit_report(rows, [], tmp_path, cfg)

    table = (tmp_path / "noiseless.csv").read_text().splitlines()
    assert table[0].split(",")[:3] == ["mode", "algorithm", "n"]
    assert "wall_time" not in table[0]
    assert len(table) == 1 + len(rows)
    assert table[1].startswith("noiseless,gbs-residual,16,2,2,,,0,")

    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 4  # 2 cells x 2 algorithms
    assert "wall_time" not in summary[0]

    meta = json.loads(paths["meta"].read_text())
    assert meta["seed"] == cfg.seed
    assert "philox" in meta["rng_algorithm"].lower()
    assert "common random numbers" in meta["seed_split_rule"]
    assert meta["config"]["d_hat_sweep"] == [2, 4]
    assert meta["config"]["mode"] == "noiseless"


def test_emit_report_rejects_empty(tmp_path):
    cfg = tiny_noiseless_config()
    with pytest.raises(ValueError, match="rows is empty"):
        emit_report([], [], tmp_path, cfg)
