"""Command line front end.

    precond-miner noiseless --config sweep.cfg
    precond-miner noisy --config noise.cfg
    precond-miner probe --oracle tcp://127.0.0.1:4444 --d-hat 5
    precond-miner decode --log observations.ndjson
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .barinel import MleConfig, rank_diagnoses, report_to_csv, staccato_candidates
from .errors import ConfigError, ProtocolError, TransportError
from .harness import (
    MODE_NOISELESS,
    MODE_NOISY,
    emit_report,
    load_config,
    run_noiseless_benchmark,
    run_noisy_benchmark,
)
from .model import ObservationLog
from .oracle import RecordingOracle
from .protocol import ExternalOracleSession
from .splitting import SplitSearchConfig, find_necessary_conditions


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="precond-miner",
        description="Search for the environmental conditions a black-box exploit depends on.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    noiseless = sub.add_parser("noiseless", help="run the noiseless d_hat sweep benchmark")
    noiseless.add_argument("--config", required=True, help="experiment config file")
    noiseless.add_argument("--outdir", help="override the config's output directory")

    noisy = sub.add_parser("noisy", help="run the noisy adaptive-search benchmark")
    noisy.add_argument("--config", required=True, help="experiment config file")
    noisy.add_argument("--outdir", help="override the config's output directory")

    probe = sub.add_parser("probe", help="drive a live oracle over the wire protocol")
    probe.add_argument("--oracle", required=True, help="rig address, tcp://host:port")
    probe.add_argument("--d-hat", type=int, required=True, help="assumed necessary-set size")
    probe.add_argument("--timeout", type=float, default=None, help="per-test timeout in seconds")
    probe.add_argument("--trace", action="store_true", help="print one line per issued test")

    decode = sub.add_parser("decode", help="rank diagnoses for a saved observation log")
    decode.add_argument("--log", required=True, help="observation log (NDJSON)")
    decode.add_argument("--cap", type=int, default=100, help="candidate cap (default 100)")
    decode.add_argument("--prior", type=float, default=0.01, help="fault prior p (default 0.01)")
    decode.add_argument("--out", help="write the report CSV here instead of stdout")
    return parser


def _run_benchmark(args, mode: str) -> int:
    cfg = load_config(args.config)
    if cfg.mode != mode:
        raise ConfigError(f"config has mode {cfg.mode!r} but the {mode} command was invoked")
    outdir = args.outdir if args.outdir else cfg.outdir
    if mode == MODE_NOISELESS:
        rows, traces = run_noiseless_benchmark(cfg), []
    else:
        rows, traces = run_noisy_benchmark(cfg)
    paths = emit_report(rows, traces, outdir, cfg)
    for name in ("noiseless", "traces", "summary", "meta"):
        print(paths[name])
    return 0


def _run_probe(args) -> int:
    with ExternalOracleSession.connect(args.oracle, timeout=args.timeout) as session:
        catalog = session.handshake()
        print(f"catalog: {catalog.n} conditions")
        observer = None
        if args.trace:
            def observer(seq, ids, outcome):
                print(f"test {seq}: disable={list(ids)} -> {outcome.value}")
        oracle = RecordingOracle(session, observer=observer)
        result = find_necessary_conditions(
            range(catalog.n), SplitSearchConfig(args.d_hat), oracle
        )
        print(f"tests used: {result.tests_used}")
        print(f"residual retest fired: {'yes' if result.residual_positive else 'no'}")
        for cid in sorted(result.defectives):
            cond = catalog.conditions[cid]
            print(f"necessary: {cid} [{cond.group}] {cond.label}")
    return 0


def _run_decode(args) -> int:
    log = ObservationLog.load(args.log)
    candidates = staccato_candidates(log, cap=args.cap)
    report = rank_diagnoses(candidates, log, prior_p=args.prior, mle=MleConfig())
    if args.out:
        with Path(args.out).open("w", encoding="utf-8", newline="") as handle:
            report_to_csv(report, handle)
    else:
        report_to_csv(report, sys.stdout)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "noiseless":
            return _run_benchmark(args, MODE_NOISELESS)
        if args.command == "noisy":
            return _run_benchmark(args, MODE_NOISY)
        if args.command == "probe":
            return _run_probe(args)
        if args.command == "decode":
            return _run_decode(args)
    except (ConfigError, TransportError, ProtocolError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
