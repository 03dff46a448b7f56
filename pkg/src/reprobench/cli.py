"""Command-line entry points.

    repro-bench server  --config server.config
    repro-bench corpus filter corpus.records
    repro-bench compare --store metrics.journal --buggy K1 --corrected K2
    repro-bench report  --pairs pairs.records --out report.csv
    repro-bench summary KEY --store metrics.journal

Exit codes: 0 success, 2 validation failure, 3 insufficient data.
"""

import argparse
import logging
import os
import sys

from .errors import (
    InsufficientData,
    InvalidFormat,
    InvalidRecord,
    PairMismatch,
    ReproBenchError,
    StorageError,
    UnknownExperiment,
)
from .model import METRIC_NAMES
from .records import read_records
from .server import BenchServer, ServerConfig, load_results
from .stats import descriptive
from .study import (
    BugRecord,
    ComparisonReport,
    build_report,
    filter_corpus,
    render_report,
    report_from_pvalue_records,
    results_pair_rows,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INSUFFICIENT = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repro-bench",
        description="Deterministic benchmarking of buggy vs corrected experiment pairs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_server = sub.add_parser("server", help="run the benchmarking server")
    p_server.add_argument("--config", required=True, help="server config record file")

    p_corpus = sub.add_parser("corpus", help="bug corpus operations")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)
    p_filter = corpus_sub.add_parser("filter", help="apply the silent-bug rejection criteria")
    p_filter.add_argument("corpus", help="bug corpus record file")
    p_filter.add_argument("--out", help="write accepted records here")

    p_compare = sub.add_parser("compare", help="U-test one buggy/corrected pair")
    p_compare.add_argument("--store", default="metrics.journal",
                           help="metrics journal to read (default: ./metrics.journal)")
    p_compare.add_argument("--buggy", required=True, help="experiment key of the buggy side")
    p_compare.add_argument("--corrected", required=True, help="experiment key of the corrected side")
    p_compare.add_argument("--alpha", type=float, default=0.05)
    p_compare.add_argument("--format", default="text-table",
                           choices=["text-table", "csv", "records"])

    p_report = sub.add_parser("report", help="comparison report over many pairs")
    p_report.add_argument("--pairs", required=True,
                          help="record file of precomputed p-value rows or "
                               "{buggy_key, corrected_key} rows")
    p_report.add_argument("--store", help="metrics journal (needed for key rows)")
    p_report.add_argument("--alpha", type=float, default=0.05)
    p_report.add_argument("--format", default="csv",
                          choices=["text-table", "csv", "records"])
    p_report.add_argument("--out", help="output path (stdout when omitted)")

    p_summary = sub.add_parser("summary", help="descriptive statistics of one experiment")
    p_summary.add_argument("key", help="experiment key (bug_identifier/evaluation_type)")
    p_summary.add_argument("--store", default="metrics.journal",
                           help="metrics journal to read (default: ./metrics.journal)")

    return parser


def _require_file(path: str) -> None:
    if not os.path.exists(path):
        raise InvalidRecord(f"no such file: {path}")


def _cmd_server(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    _require_file(args.config)
    server = BenchServer(ServerConfig.load(args.config))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def _cmd_corpus_filter(args) -> int:
    _require_file(args.corpus)
    records = [BugRecord.from_record(r) for r in read_records(args.corpus)]
    accepted, rejected = filter_corpus(records)
    print(f"corpus: {len(records)} records")
    print(f"accepted: {len(accepted)}"
          + (f" ({sum(1 for r in accepted if r.favoured)} favoured)" if accepted else ""))
    for code in sorted(rejected):
        print(f"rejected[{code}]: {len(rejected[code])}")
    if args.out:
        from .records import write_records

        write_records(args.out, [r.to_record() for r in accepted])
        print(f"accepted records written to {args.out}")
    return EXIT_OK


def _load_store(path: str):
    _require_file(path)
    return load_results(path)


def _cmd_compare(args) -> int:
    results = _load_store(args.store)
    try:
        buggy = results[args.buggy]
        corrected = results[args.corrected]
    except KeyError as exc:
        raise UnknownExperiment(f"experiment {exc} not present in {args.store}") from None
    report = build_report([(buggy, corrected)], alpha=args.alpha)
    row = report.rows[0]
    if row.error:
        raise InsufficientData(f"pair {args.buggy} / {args.corrected}: {row.error}")
    sys.stdout.write(render_report(report, args.format).decode("utf-8"))
    return EXIT_OK


def _cmd_report(args) -> int:
    _require_file(args.pairs)
    records = read_records(args.pairs)
    pvalue_rows = [r for r in records if "p_accuracy" in r]
    key_rows = [r for r in records if "buggy_key" in r]
    if len(pvalue_rows) + len(key_rows) != len(records):
        raise InvalidRecord("pairs file mixes unrecognized row shapes")

    report = report_from_pvalue_records(pvalue_rows, alpha=args.alpha)
    if key_rows:
        if not args.store:
            raise InvalidRecord("--store is required when pair rows reference experiment keys")
        results = _load_store(args.store)
        computed = build_report(results_pair_rows(key_rows, results), alpha=args.alpha)
        report = ComparisonReport(alpha=args.alpha, rows=report.rows + computed.rows)

    rendered = render_report(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(rendered)
        print(f"report written to {args.out} ({len(report.rows)} rows)")
    else:
        sys.stdout.write(rendered.decode("utf-8"))
    return EXIT_OK


def _cmd_summary(args) -> int:
    results = _load_store(args.store)
    if args.key not in results:
        raise UnknownExperiment(f"experiment {args.key!r} not present in {args.store}")
    experiment = results[args.key]
    summary = descriptive(experiment)
    print(f"experiment {args.key}: {experiment.completed_runs} completed run(s)"
          + (f", {experiment.shortfall} short of plan" if experiment.shortfall else ""))
    for name in METRIC_NAMES:
        m = summary[name]
        std = f"{m.std:.6f}" if m.std is not None else "n/a"
        print(f"{name:>9}: mean={m.mean:.6f} std={std} "
              f"min={m.minimum:.6f} max={m.maximum:.6f} n={m.count}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "server":
            return _cmd_server(args)
        if args.command == "corpus":
            return _cmd_corpus_filter(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "summary":
            return _cmd_summary(args)
        raise InvalidRecord(f"unknown command {args.command!r}")
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (InvalidRecord, InvalidFormat, PairMismatch, UnknownExperiment, StorageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ReproBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
