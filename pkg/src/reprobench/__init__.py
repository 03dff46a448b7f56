"""reprobench: deterministic benchmarking of ML experiments.

A small client/server system for running repeatable experiment campaigns:
the server derives and journals every random seed, serves checksummed
train/test index splits over a framed TCP protocol, collects per-run
classification metrics, and the stats layer compares buggy vs corrected
experiment pairs with a two-tailed non-paired Wilcoxon-Mann-Whitney U-test.
"""

from . import errors
from .model import (
    ChallengeManifest,
    EvaluationType,
    ExperimentResults,
    ExperimentSpec,
    PairValidation,
    RunMetrics,
    validate_experiment_pair,
)
from .seeds import SeedRecord, SeedRegistry, derive_root_seed, derive_subseed
from .server import BenchServer, MetricsStore, ServerConfig, TrainerProfile, synthetic_client_run
from .splitting import SplitAssignment, chain_checksum, make_split, seeded_permutation
from .stats import (
    DescriptiveSummary,
    Mode,
    UTestResult,
    compare_experiments,
    descriptive,
    macro_metrics,
    mann_whitney_u,
    rank_with_ties,
)
from .study import (
    BugRecord,
    ComparisonReport,
    build_report,
    filter_corpus,
    render_report,
    report_from_pvalue_records,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "ChallengeManifest",
    "EvaluationType",
    "ExperimentResults",
    "ExperimentSpec",
    "PairValidation",
    "RunMetrics",
    "validate_experiment_pair",
    "SeedRecord",
    "SeedRegistry",
    "derive_root_seed",
    "derive_subseed",
    "BenchServer",
    "MetricsStore",
    "ServerConfig",
    "TrainerProfile",
    "synthetic_client_run",
    "SplitAssignment",
    "chain_checksum",
    "make_split",
    "seeded_permutation",
    "DescriptiveSummary",
    "Mode",
    "UTestResult",
    "compare_experiments",
    "descriptive",
    "macro_metrics",
    "mann_whitney_u",
    "rank_with_ties",
    "BugRecord",
    "ComparisonReport",
    "build_report",
    "filter_corpus",
    "render_report",
    "report_from_pvalue_records",
]
