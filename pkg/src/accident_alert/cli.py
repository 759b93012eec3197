"""Command line entry point: ``accident-alert {replay,synth,metrics,suite}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .geo import RegistryError, load_registry
from .modem_sim import FaultScriptError, load_fault_script
from .trace import SCENARIOS, TraceError, load_trace, save_trace, synthesize_trace


def _write_or_print(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = pipeline.load_config(args.config) if args.config else pipeline.PipelineConfig()
    registry = load_registry(args.registry)
    faults = load_fault_script(args.fault_script) if args.fault_script else None
    trace = load_trace(args.trace)
    result = pipeline.run(trace, cfg, registry=registry, faults=faults)
    _write_or_print(pipeline.dump_document(pipeline.report_document(result)), args.report)
    if args.transcript:
        Path(args.transcript).write_text(pipeline.transcript_text(result.deliveries), encoding="utf-8")
    if args.log:
        Path(args.log).write_text(pipeline.log_text(result), encoding="utf-8")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    save_trace(synthesize_trace(args.scenario, args.seed), args.out)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    docs = [json.loads(Path(p).read_text(encoding="utf-8")) for p in args.reports]
    _write_or_print(pipeline.dump_document(pipeline.merge_documents(docs)), args.out)
    return 0


def cmd_suite(args: argparse.Namespace) -> int:
    """Replay the 20-place evaluation suite and print the merged report."""
    registry = load_registry(args.registry)
    faults = load_fault_script(args.fault_script) if args.fault_script else None
    cfg = pipeline.PipelineConfig()
    docs = []
    for scenario, seed in pipeline.FIELD_TRIAL_SUITE:
        result = pipeline.run(synthesize_trace(scenario, seed), cfg, registry=registry, faults=faults)
        docs.append(pipeline.report_document(result))
    _write_or_print(pipeline.dump_document(pipeline.merge_documents(docs)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accident-alert", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay one trace against the simulated modem")
    p.add_argument("--trace", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--config")
    p.add_argument("--fault-script")
    p.add_argument("--report", help="write the report here instead of stdout")
    p.add_argument("--transcript", help="write AT dialogue transcripts here")
    p.add_argument("--log", help="write the event log here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("synth", help="generate a synthetic trace")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", help="merge shard reports")
    p.add_argument("--reports", required=True, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("suite", help="replay the 20-place synthetic evaluation suite")
    p.add_argument("--registry", required=True)
    p.add_argument("--fault-script")
    p.add_argument("--out")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, TraceError, RegistryError, FaultScriptError, ValueError, TypeError) as exc:
        print(f"accident-alert: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
