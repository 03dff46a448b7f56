"""Bug-study methodology: corpus filtering, pair comparison, and reports.

A study starts from a corpus of framework bugs (one record per bug, with
the silent-bug rejection codes already applied by reviewers), runs the
buggy and corrected experiment of each surviving bug, and ends in a
per-metric p-value table with significance and completion (dagger)
markings.
"""

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Optional

from .errors import InsufficientData, InvalidFormat, InvalidRecord
from .model import METRIC_NAMES
from .records import encode_record
from .stats import compare_experiments

__all__ = [
    "REJECTION_CODES",
    "FAVOUR_TAGS",
    "Stage",
    "BugRecord",
    "filter_corpus",
    "ReportRow",
    "ComparisonReport",
    "build_report",
    "report_from_pvalue_records",
    "render_report",
]

REJECTION_CODES = (
    "COMPILE_ERROR",    # bug breaks the build outright
    "RUNTIME_CRASH",    # bug makes the application exit: not silent
    "USER_CODE",        # caused by end-user code, not the framework
    "CPU_ONLY",         # CPU-only reproduction is too slow to measure
    "NO_AFFECTED_APP",  # no application demonstrably affected
)

FAVOUR_TAGS = ("GRADIENTS", "MATH_FUNCTIONS")


class Stage(enum.Enum):
    COLLECTED = "collected"
    FILTERED = "filtered"
    BUILT = "built"
    EVALUATED = "evaluated"


@dataclass(frozen=True)
class BugRecord:
    """One corpus entry: a bug and the two framework revisions around its fix.

    The revisions are adjacent commits (last version with the bug, first
    with the fix). ``rejection_codes`` keeps reviewer order: the first code
    listed is the one the bug is filed under when grouped.
    """

    bug_id: str
    pr_number: int
    buggy_revision: str
    corrected_revision: str
    rejection_codes: tuple = ()
    favour_tags: tuple = ()
    stage: Stage = Stage.COLLECTED

    def __post_init__(self):
        if not self.bug_id:
            raise InvalidRecord("bug_id must be non-empty")
        object.__setattr__(self, "rejection_codes", tuple(self.rejection_codes))
        object.__setattr__(self, "favour_tags", tuple(self.favour_tags))
        if self.buggy_revision == self.corrected_revision:
            raise InvalidRecord(f"bug {self.bug_id}: revisions must differ")
        for code in self.rejection_codes:
            if code not in REJECTION_CODES:
                raise InvalidRecord(f"bug {self.bug_id}: unknown rejection code {code!r}")
        if len(set(self.rejection_codes)) != len(self.rejection_codes):
            raise InvalidRecord(f"bug {self.bug_id}: duplicate rejection codes")
        for tag in self.favour_tags:
            if tag not in FAVOUR_TAGS:
                raise InvalidRecord(f"bug {self.bug_id}: unknown favour tag {tag!r}")
        if self.rejection_codes and self.stage is not Stage.COLLECTED:
            raise InvalidRecord(
                f"bug {self.bug_id}: rejected records cannot advance past collected"
            )

    @property
    def rejected(self) -> bool:
        return bool(self.rejection_codes)

    @property
    def favoured(self) -> bool:
        return bool(self.favour_tags)

    def to_record(self) -> dict:
        return {
            "bug_id": self.bug_id,
            "pr_number": self.pr_number,
            "buggy_revision": self.buggy_revision,
            "corrected_revision": self.corrected_revision,
            "rejection_codes": list(self.rejection_codes),
            "favour_tags": list(self.favour_tags),
            "stage": self.stage.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> "BugRecord":
        try:
            return cls(
                bug_id=record["bug_id"],
                pr_number=int(record["pr_number"]),
                buggy_revision=record["buggy_revision"],
                corrected_revision=record["corrected_revision"],
                rejection_codes=tuple(record.get("rejection_codes", ())),
                favour_tags=tuple(record.get("favour_tags", ())),
                stage=Stage(record.get("stage", "collected")),
            )
        except KeyError as exc:
            raise InvalidRecord(f"bug record missing field {exc}") from None
        except ValueError as exc:
            raise InvalidRecord(str(exc)) from None


def filter_corpus(records) -> tuple[list, dict]:
    """Split a corpus into accepted and rejected bugs.

    A bug is rejected iff it carries any rejection code, and is grouped
    under the first code its reviewers listed. Accepted bugs keep corpus
    order except that favourably-tagged ones (gradient / math-function
    related) come first — they get priority because a false negative there
    is costlier than wasted measurement elsewhere.
    """
    accepted: list = []
    rejected: dict = {}
    for record in records:
        if record.rejected:
            rejected.setdefault(record.rejection_codes[0], []).append(record)
        else:
            accepted.append(record)
    accepted.sort(key=lambda r: 0 if r.favoured else 1)  # stable within groups
    return accepted, rejected


# --------------------------------------------------------------------------
# Comparison reports


@dataclass(frozen=True)
class ReportRow:
    bug_id: str
    p_values: dict  # metric name -> float, empty when errored
    dagger: bool
    significant_metrics: frozenset
    error: str = ""  # e.g. "insufficient-data"; p_values empty when set

    def p_value(self, metric: str) -> Optional[float]:
        return self.p_values.get(metric)


@dataclass(frozen=True)
class ComparisonReport:
    alpha: float
    rows: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ordered = tuple(sorted(self.rows, key=lambda r: r.bug_id))
        object.__setattr__(self, "rows", ordered)


def _row_from_pvalues(bug_id: str, p_values: dict, dagger: bool, alpha: float) -> ReportRow:
    for name, p in p_values.items():
        if not 0.0 <= p <= 1.0:
            raise InvalidRecord(f"bug {bug_id}: p-value {name}={p} outside [0,1]")
    significant = frozenset(name for name, p in p_values.items() if p < alpha)
    return ReportRow(
        bug_id=bug_id, p_values=dict(p_values), dagger=dagger,
        significant_metrics=significant,
    )


def build_report(pairs, alpha: float = 0.05, allow_mismatched_pairs: bool = False) -> ComparisonReport:
    """Comparison report over (buggy, corrected) ExperimentResults pairs.

    Pairs without enough runs become error-marked rows instead of sinking
    the whole report.
    """
    rows = []
    for buggy, corrected in pairs:
        bug_id = buggy.spec.bug_identifier
        try:
            comparison = compare_experiments(
                buggy, corrected, alpha=alpha,
                allow_mismatched_pair=allow_mismatched_pairs,
            )
        except InsufficientData:
            rows.append(ReportRow(
                bug_id=bug_id, p_values={}, dagger=True,
                significant_metrics=frozenset(), error="insufficient-data",
            ))
            continue
        rows.append(_row_from_pvalues(
            bug_id,
            {name: comparison.tests[name].p_value for name in METRIC_NAMES},
            comparison.dagger,
            alpha,
        ))
    return ComparisonReport(alpha=alpha, rows=tuple(rows))


def report_from_pvalue_records(records, alpha: float = 0.05) -> ComparisonReport:
    """Ingest precomputed p-value rows (e.g. a published study table).

    Each record needs bug_id, p_accuracy/p_precision/p_recall/p_f1, and an
    optional dagger flag; significance is recomputed against ``alpha``.
    """
    rows = []
    for record in records:
        try:
            p_values = {name: float(record[f"p_{name}"]) for name in METRIC_NAMES}
            rows.append(_row_from_pvalues(
                record["bug_id"], p_values, bool(record.get("dagger", False)), alpha,
            ))
        except KeyError as exc:
            raise InvalidRecord(f"p-value record missing field {exc}") from None
    return ComparisonReport(alpha=alpha, rows=tuple(rows))


def results_pair_rows(records, results_by_key) -> list:
    """Resolve {buggy_key, corrected_key} rows against exported results."""
    pairs = []
    for record in records:
        try:
            buggy = results_by_key[record["buggy_key"]]
            corrected = results_by_key[record["corrected_key"]]
        except KeyError as exc:
            raise InvalidRecord(f"pair references unknown experiment {exc}") from None
        pairs.append((buggy, corrected))
    return pairs


# --------------------------------------------------------------------------
# Rendering


def _format_p(p: Optional[float], significant: bool, emphasize: bool) -> str:
    if p is None:
        return "n/a"
    text = f"{p:.5f}"
    if emphasize and significant:
        return f"*{text}*"
    return text


def render_report(report: ComparisonReport, format: str = "text-table") -> bytes:
    """Deterministic rendering; identical reports give identical bytes.

    text-table emphasizes significant p-values with asterisks and appends a
    dagger to bugs that missed their planned run count; p-values print with
    5 decimal places everywhere.
    """
    if format == "text-table":
        return _render_text_table(report)
    if format == "csv":
        return _render_csv(report)
    if format == "records":
        return _render_records(report)
    raise InvalidFormat(f"unknown report format {format!r}")


def _row_label(row: ReportRow) -> str:
    return row.bug_id + ("†" if row.dagger else "")


def _render_text_table(report: ComparisonReport) -> bytes:
    header = ["bug", *METRIC_NAMES]
    table = [header]
    for row in report.rows:
        cells = [_row_label(row)]
        if row.error:
            cells.extend([f"({row.error})", "", "", ""])
        else:
            cells.extend(
                _format_p(row.p_value(name), name in row.significant_metrics, True)
                for name in METRIC_NAMES
            )
        table.append(cells)
    widths = [max(len(r[col]) for r in table) for col in range(len(header))]
    lines = []
    for i, cells in enumerate(table):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * width for width in widths))
    lines.append(f"alpha = {report.alpha}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _render_csv(report: ComparisonReport) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bug_id", *(f"p_{name}" for name in METRIC_NAMES),
                     "dagger", "significant_metrics", "error"])
    for row in report.rows:
        writer.writerow([
            row.bug_id,
            *(_format_p(row.p_value(name), False, False) for name in METRIC_NAMES),
            "true" if row.dagger else "false",
            ";".join(sorted(row.significant_metrics)),
            row.error,
        ])
    return buffer.getvalue().encode("utf-8")


def _render_records(report: ComparisonReport) -> bytes:
    lines = []
    for row in report.rows:
        record = {
            "bug_id": row.bug_id,
            "dagger": row.dagger,
            "significant_metrics": sorted(row.significant_metrics),
            "alpha": report.alpha,
        }
        if row.error:
            record["error"] = row.error
        else:
            for name in METRIC_NAMES:
                record[f"p_{name}"] = row.p_value(name)
        lines.append(encode_record(record))
    return b"".join(line + b"\n" for line in lines)
