"""Single entry point: voiceclone <subcommand>.

Subcommands: corpus (stats|validate), clone, lint, serve, trial, blind,
aggregate, report. Every subcommand honors --config (or $VC_CONFIG) and
--out. Exit codes: 0 success, 1 validation problem, 2 runtime failure.
Logs go to stderr; machine-readable results go to stdout or --out files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .adapters import AdapterError, load_scenario
from .cloning import CloningError, run_clone_pipeline
from .config import ConfigError, load_config
from .corpus import CorpusError, corpus_stats, load_corpus
from .evaluation import (
    EvaluationError,
    LocalGateway,
    aggregate_scores,
    build_blind_packet,
    compare_reports,
    ingest_score_sheets,
    load_rubric,
    parse_scoresheets_csv,
    recording_from_dict,
    reference_trial,
    report_from_dict,
    run_scripted_trial,
    write_blind_packet,
)
from .extraction import ExtractionError
from .playbook import (
    PlaybookError,
    export_finetune_dataset,
    lint_playbook,
    parse_playbook,
    qa_pairs_to_jsonl,
    to_canonical_json,
)

logger = logging.getLogger("voiceclone")

_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    CloningError,
    PlaybookError,
    EvaluationError,
    AdapterError,
    ExtractionError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> _Parser:
    parser = _Parser(prog="voiceclone", description=__doc__)
    parser.add_argument("--version", action="version", version=f"voiceclone {__version__}")
    parser.add_argument("--config", help="TOML config file (default: $VC_CONFIG)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_corpus = sub.add_parser("corpus", help="corpus statistics and validation")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", parser_class=_Parser)
    p_stats = corpus_sub.add_parser("stats", help="print corpus statistics as JSON")
    p_stats.add_argument("path")
    p_stats.add_argument("--out")
    p_validate = corpus_sub.add_parser("validate", help="report per-line diagnostics")
    p_validate.add_argument("path")
    p_validate.add_argument("--out")

    p_clone = sub.add_parser("clone", help="run the cloning pipeline to a playbook")
    p_clone.add_argument("--corpus", help="corpus JSONL (default from config)")
    p_clone.add_argument("--out", default="playbook.json")
    p_clone.add_argument("--seed", type=int, help="sampling seed (default from config)")
    p_clone.add_argument(
        "--finetune-out", help="also export the Q&A fine-tune dataset as JSONL"
    )
    p_clone.add_argument(
        "--finetune-n", type=int, default=50, help="product Q&A pair target (default 50)"
    )

    p_lint = sub.add_parser("lint", help="lint a playbook file")
    p_lint.add_argument("playbook")
    p_lint.add_argument("--out")

    p_render = sub.add_parser("render", help="render a playbook to its system prompt")
    p_render.add_argument("playbook")
    p_render.add_argument("--out")
    p_render.add_argument(
        "--slot",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="slot value (repeatable); defaults come from gateway config",
    )

    p_serve = sub.add_parser("serve", help="run the realtime gateway")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--playbook-dir", help="directory of playbook JSON files")

    p_trial = sub.add_parser("trial", help="run one scripted evaluation trial")
    p_trial.add_argument("--scenario", required=True)
    p_trial.add_argument("--adapter", default="scripted")
    p_trial.add_argument("--playbook", default="playbook", help="playbook id")
    p_trial.add_argument("--playbook-dir")
    p_trial.add_argument("--agent-kind", choices=("ai", "human"), default="ai")
    p_trial.add_argument("--trial-id")
    p_trial.add_argument("--out")

    p_blind = sub.add_parser("blind", help="build a blind evaluation packet")
    p_blind.add_argument("recordings", nargs="+", help="trial recording JSON files")
    p_blind.add_argument("--seed", type=int, required=True)
    p_blind.add_argument("--out", default="packet.json")
    p_blind.add_argument("--key", default="key.json")

    p_agg = sub.add_parser("aggregate", help="aggregate evaluator score sheets")
    p_agg.add_argument("--packet", required=True)
    p_agg.add_argument("--key", required=True)
    p_agg.add_argument("--sheets", required=True, help="scoresheet CSV")
    p_agg.add_argument("--rubric", help="rubric JSON (default: bundled)")
    p_agg.add_argument("--out", default="report.json")
    p_agg.add_argument("--csv-out", help="also write the report as CSV")

    p_report = sub.add_parser("report", help="compare two aggregate reports")
    p_report.add_argument("--compare", nargs=2, metavar=("V1", "V2"), required=True)
    p_report.add_argument("--threshold", type=float)
    p_report.add_argument("--out")

    return parser


def _cmd_corpus(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.path)
    for diagnostic in corpus.diagnostics:
        print(f"{args.path}:{diagnostic.line}: {diagnostic.message}", file=sys.stderr)
    if args.corpus_command == "stats":
        stats = corpus_stats(corpus)
        _write_output(json.dumps(stats.to_dict(), indent=2) + "\n", args.out)
        return 0
    # validate: exit 0 iff zero violations
    summary = {
        "records": len(corpus.records),
        "diagnostics": [
            {"line": d.line, "message": d.message} for d in corpus.diagnostics
        ],
    }
    _write_output(json.dumps(summary, indent=2) + "\n", args.out)
    return 0 if not corpus.diagnostics else 1


def _cmd_clone(args: argparse.Namespace, config) -> int:
    corpus_path = args.corpus or config.corpus_path
    corpus = load_corpus(corpus_path)
    for diagnostic in corpus.diagnostics:
        print(f"{corpus_path}:{diagnostic.line}: {diagnostic.message}", file=sys.stderr)
    if not corpus.records:
        raise CorpusError("corpus has no valid records")
    result = run_clone_pipeline(corpus, config, seed=args.seed)
    _write_output(to_canonical_json(result.playbook), args.out)
    logger.info("wrote playbook with %d facts to %s", len(result.playbook.product_knowledge), args.out)
    if args.finetune_out:
        pairs = export_finetune_dataset(result.manual, target_n=args.finetune_n)
        _write_output(qa_pairs_to_jsonl(pairs), args.finetune_out)
        logger.info("wrote %d Q&A pairs to %s", len(pairs), args.finetune_out)
    return 0


def _cmd_lint(args: argparse.Namespace) -> int:
    playbook = parse_playbook(Path(args.playbook).read_text(encoding="utf-8"))
    diagnostics = lint_playbook(playbook)
    lines = "".join(f"{d.code}\t{d.location}\t{d.message}\n" for d in diagnostics)
    _write_output(lines, args.out)
    return 0 if not any(d.severity == "error" for d in diagnostics) else 1


def _cmd_render(args: argparse.Namespace, config) -> int:
    from .playbook import render_system_prompt

    playbook = parse_playbook(Path(args.playbook).read_text(encoding="utf-8"))
    slot_values = dict(config.gateway.slot_values)
    for spec in args.slot:
        name, sep, value = spec.partition("=")
        if not sep:
            raise ValueError(f"--slot expects NAME=VALUE, got '{spec}'")
        slot_values[name] = value
    _write_output(render_system_prompt(playbook, slot_values), args.out)
    return 0


def _cmd_serve(args: argparse.Namespace, config) -> int:
    import uvicorn

    from .gateway.server import create_app

    gw = config.gateway
    if args.host:
        gw.host = args.host
    if args.port:
        gw.port = args.port
    if args.playbook_dir:
        gw.playbook_dir = args.playbook_dir
    app = create_app(gw)
    logger.info("gateway listening on ws://%s:%d/v1/session", gw.host, gw.port)
    uvicorn.run(app, host=gw.host, port=gw.port, log_level="warning")
    return 0


def _cmd_trial(args: argparse.Namespace, config) -> int:
    scenario = load_scenario(args.scenario)
    if args.agent_kind == "human":
        recording = reference_trial(scenario, trial_id=args.trial_id)
    else:
        gateway = LocalGateway(
            args.playbook_dir or config.gateway.playbook_dir,
            slot_values=config.gateway.slot_values,
            queue_capacity=config.gateway.queue_capacity,
        )
        recording = run_scripted_trial(
            gateway,
            scenario,
            adapter_kind=args.adapter,
            playbook_id=args.playbook,
            trial_id=args.trial_id,
        )
    _write_output(
        json.dumps(recording.to_dict(), indent=2, ensure_ascii=False) + "\n", args.out
    )
    if not recording.valid:
        print(f"trial failed: {recording.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_blind(args: argparse.Namespace) -> int:
    recordings = [
        recording_from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
        for p in args.recordings
    ]
    packet = build_blind_packet(recordings, seed=args.seed)
    write_blind_packet(packet, args.out, args.key)
    logger.info("wrote %d blinded items to %s (key: %s)", len(packet.items), args.out, args.key)
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    from .evaluation import BlindPacket

    packet_data = json.loads(Path(args.packet).read_text(encoding="utf-8"))
    sealed_key = json.loads(Path(args.key).read_text(encoding="utf-8"))
    packet = BlindPacket(items=packet_data.get("items", []), sealed_key=sealed_key)
    rubric = load_rubric(args.rubric)
    sheets = parse_scoresheets_csv(Path(args.sheets).read_text(encoding="utf-8"))
    table = ingest_score_sheets(packet, sheets, rubric)
    report = aggregate_scores(table, sealed_key, rubric)
    _write_output(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", args.out
    )
    if args.csv_out:
        _write_output(report.to_csv(), args.csv_out)
    return 0


def _cmd_report(args: argparse.Namespace, config) -> int:
    v1 = report_from_dict(json.loads(Path(args.compare[0]).read_text(encoding="utf-8")))
    v2 = report_from_dict(json.loads(Path(args.compare[1]).read_text(encoding="utf-8")))
    threshold = (
        args.threshold if args.threshold is not None else config.evaluation.delta_threshold
    )
    comparison = compare_reports(v1, v2, delta_threshold=threshold)
    _write_output(json.dumps(comparison, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "corpus" and not args.corpus_command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        config = load_config(args.config)
        if args.command == "corpus":
            return _cmd_corpus(args)
        if args.command == "clone":
            return _cmd_clone(args, config)
        if args.command == "lint":
            return _cmd_lint(args)
        if args.command == "render":
            return _cmd_render(args, config)
        if args.command == "serve":
            return _cmd_serve(args, config)
        if args.command == "trial":
            return _cmd_trial(args, config)
        if args.command == "blind":
            return _cmd_blind(args)
        if args.command == "aggregate":
            return _cmd_aggregate(args)
        if args.command == "report":
            return _cmd_report(args, config)
        parser.print_usage(sys.stderr)
        return 1
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
