"""Classification metrics, descriptive statistics, and the two-tailed
non-paired Wilcoxon-Mann-Whitney U-test.

The U-test is the significance instrument for buggy/corrected comparisons:
exact enumeration of the rank distribution for small tie-free samples, and
the tie-corrected normal approximation (with continuity correction)
otherwise. The normal CDF uses the Abramowitz-Stegun 7.1.26 rational
approximation of erf (absolute error <= 1.5e-7) so results are reproducible
bit-for-bit across runtimes with no math-library dependence.
"""

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import (
    ExactUnavailable,
    InsufficientData,
    InvalidConfusion,
    InvalidSample,
    PairMismatch,
)
from .model import METRIC_NAMES, ExperimentResults, RunMetrics, validate_experiment_pair

__all__ = [
    "macro_metrics",
    "rank_with_ties",
    "Mode",
    "Method",
    "UTestResult",
    "mann_whitney_u",
    "PairMismatch",
    "ExperimentComparison",
    "compare_experiments",
    "MetricSummary",
    "DescriptiveSummary",
    "descriptive",
    "standard_normal_cdf",
]


# --------------------------------------------------------------------------
# Macro-averaged metrics


def macro_metrics(confusion, run_index: int = 0) -> RunMetrics:
    """Macro-averaged accuracy/precision/recall/F1 from a confusion matrix.

    Rows are true classes, columns predicted. Each class is scored
    one-vs-rest and the four metrics are unweighted means over classes, so
    small classes count as much as large ones. Zero denominators contribute
    a 0 score rather than an error.
    """
    try:
        matrix = np.asarray(confusion)
    except ValueError as exc:
        raise InvalidConfusion(f"ragged confusion matrix: {exc}") from exc
    if matrix.dtype == object or matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidConfusion(f"confusion matrix must be square, got shape {matrix.shape}")
    if matrix.shape[0] < 2:
        raise InvalidConfusion("confusion matrix needs at least 2 classes")
    if not np.issubdtype(matrix.dtype, np.integer):
        try:
            integral = np.all(np.equal(np.mod(matrix, 1), 0))
        except TypeError:
            raise InvalidConfusion("confusion counts must be numbers") from None
        if not integral:
            raise InvalidConfusion("confusion counts must be integers")
        matrix = matrix.astype(np.int64)
    if np.any(matrix < 0):
        raise InvalidConfusion("confusion counts must be non-negative")
    total = int(matrix.sum())
    if total < 1:
        raise InvalidConfusion("confusion matrix must contain at least one count")

    k = matrix.shape[0]
    accuracy = precision = recall = f1 = 0.0
    for c in range(k):
        tp = int(matrix[c, c])
        fp = int(matrix[:, c].sum()) - tp
        fn = int(matrix[c, :].sum()) - tp
        tn = total - tp - fp - fn
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        accuracy += (tp + tn) / total
        precision += p
        recall += r
        f1 += f
    return RunMetrics(
        run_index=run_index,
        accuracy=accuracy / k,
        precision=precision / k,
        recall=recall / k,
        f1=f1 / k,
    )


# --------------------------------------------------------------------------
# Ranking and the U-test


def rank_with_ties(values) -> list[float]:
    """1-based ranks with ties sharing the mean of the ranks they span."""
    values = list(values)
    if not values:
        raise InvalidSample("cannot rank an empty sample")
    for v in values:
        if isinstance(v, float) and math.isnan(v):
            raise InvalidSample("cannot rank NaN")
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    start = 0
    while start < len(order):
        stop = start
        while stop + 1 < len(order) and values[order[stop + 1]] == values[order[start]]:
            stop += 1
        mid_rank = (start + stop) / 2.0 + 1.0
        for position in range(start, stop + 1):
            ranks[order[position]] = mid_rank
        start = stop + 1
    return ranks


class Mode(enum.Enum):
    AUTO = "auto"
    EXACT = "exact"
    NORMAL_APPROX = "normal-approx"


class Method(enum.Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal-approx"


EXACT_MAX_SAMPLE = 10  # C(20,10) rank assignments enumerate instantly


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float  # min(U1, U2)
    p_value: float
    method: Method
    n1: int
    n2: int
    u1: float
    u2: float
    degenerate: bool = False  # all pooled values identical


@lru_cache(maxsize=None)
def _u_count(m: int, n: int, u: int) -> int:
    """Number of rank arrangements of samples (m, n) with U statistic u.

    Peel off the largest pooled observation: if it comes from the first
    sample it beats all n of the second (U loses n), otherwise U is
    unchanged.
    """
    if u < 0:
        return 0
    if m == 0 or n == 0:
        return 1 if u == 0 else 0
    return _u_count(m - 1, n, u - n) + _u_count(m, n - 1, u)


def _exact_p_two_tailed(u: int, n1: int, n2: int) -> float:
    cumulative = sum(_u_count(n1, n2, k) for k in range(u + 1))
    total = math.comb(n1 + n2, n1)
    return min(1.0, (2 * cumulative) / total)


# Abramowitz-Stegun 7.1.26 erf approximation constants.
_AS_P = 0.3275911
_AS_COEFFS = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


def _erf_as(x: float) -> float:
    sign = 1.0 if x >= 0 else -1.0
    x = abs(x)
    t = 1.0 / (1.0 + _AS_P * x)
    poly = 0.0
    for coeff in reversed(_AS_COEFFS):
        poly = poly * t + coeff
    return sign * (1.0 - poly * t * math.exp(-x * x))


def standard_normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + _erf_as(z / math.sqrt(2.0)))


def _has_cross_ties(sample_a, sample_b) -> bool:
    return bool(set(sample_a) & set(sample_b))


def mann_whitney_u(sample_a, sample_b, mode: Mode = Mode.AUTO) -> UTestResult:
    """Two-tailed non-paired Wilcoxon-Mann-Whitney U-test.

    The statistic is u = min(U1, U2). Exact mode doubles the lower-tail
    probability of u under uniform rank assignments; it requires
    max(n1, n2) <= 10 and no value shared between the samples (ties within
    one sample leave the null distribution untouched). The normal
    approximation applies the tie correction and a 0.5 continuity
    correction. If every pooled value is identical the test is degenerate
    and reports p = 1.0.
    """
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    if not a or not b:
        raise InvalidSample("both samples must be non-empty")
    if any(math.isnan(v) for v in a + b):
        raise InvalidSample("samples must not contain NaN")

    n1, n2 = len(a), len(b)
    pooled_ranks = rank_with_ties(a + b)
    r1 = sum(pooled_ranks[:n1])
    u1 = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u2 = n1 * n2 - u1
    if abs(u1 + u2 - n1 * n2) > 1e-9:
        raise AssertionError(f"U1 + U2 = {u1 + u2} != n1*n2 = {n1 * n2}")
    u = min(u1, u2)

    exact_ok = max(n1, n2) <= EXACT_MAX_SAMPLE and not _has_cross_ties(a, b)
    if mode is Mode.EXACT and not exact_ok:
        raise ExactUnavailable(
            "exact mode needs tie-free samples with max(n1, n2) <= "
            f"{EXACT_MAX_SAMPLE}"
        )
    use_exact = mode is Mode.EXACT or (mode is Mode.AUTO and exact_ok)

    if use_exact:
        # Cross-tie-free U is an integer even with ties inside one sample.
        u_int = int(round(u))
        p = _exact_p_two_tailed(u_int, n1, n2)
        return UTestResult(
            u_statistic=u, p_value=p, method=Method.EXACT, n1=n1, n2=n2, u1=u1, u2=u2
        )

    n = n1 + n2
    tie_term = 0.0
    if n >= 2:
        counts: dict[float, int] = {}
        for value in a + b:
            counts[value] = counts.get(value, 0) + 1
        tie_sum = sum(t**3 - t for t in counts.values())
        tie_term = tie_sum / (n * (n - 1))
    variance = (n1 * n2 / 12.0) * ((n + 1) - tie_term)
    if variance <= 0.0:
        return UTestResult(
            u_statistic=u, p_value=1.0, method=Method.NORMAL_APPROX,
            n1=n1, n2=n2, u1=u1, u2=u2, degenerate=True,
        )
    sigma = math.sqrt(variance)
    mu = n1 * n2 / 2.0
    z = (abs(u - mu) - 0.5) / sigma
    p = 2.0 * (1.0 - standard_normal_cdf(z))
    p = min(1.0, max(0.0, p))
    return UTestResult(
        u_statistic=u, p_value=p, method=Method.NORMAL_APPROX,
        n1=n1, n2=n2, u1=u1, u2=u2,
    )


# --------------------------------------------------------------------------
# Experiment comparison


@dataclass(frozen=True)
class ExperimentComparison:
    bug_identifier: str
    alpha: float
    tests: dict  # metric name -> UTestResult
    significant_metrics: frozenset
    truncated_to: int
    buggy_completed: int
    corrected_completed: int
    dagger: bool

    def p_value(self, metric: str) -> float:
        return self.tests[metric].p_value


def compare_experiments(
    buggy: ExperimentResults,
    corrected: ExperimentResults,
    alpha: float = 0.05,
    allow_mismatched_pair: bool = False,
) -> ExperimentComparison:
    """Per-metric U-tests between a buggy/corrected experiment pair.

    Both sides are truncated to the smaller completed-run count (first k
    runs by ascending run index) so equal sample sizes are compared. The
    dagger flag marks pairs where either side fell short of its planned
    runs.
    """
    if buggy.completed_runs == 0 or corrected.completed_runs == 0:
        raise InsufficientData("both experiments need at least one completed run")
    validation = validate_experiment_pair(buggy.spec, corrected.spec)
    if not validation.ok and not allow_mismatched_pair:
        raise PairMismatch(
            "experiments are not comparable: " + ", ".join(validation.mismatches)
        )

    k = min(buggy.completed_runs, corrected.completed_runs)
    buggy_k = buggy.truncated(k)
    corrected_k = corrected.truncated(k)
    tests = {
        name: mann_whitney_u(
            buggy_k.metric_values(name), corrected_k.metric_values(name), Mode.AUTO
        )
        for name in METRIC_NAMES
    }
    significant = frozenset(name for name, test in tests.items() if test.p_value < alpha)
    dagger = (
        buggy.completed_runs < buggy.spec.planned_runs
        or corrected.completed_runs < corrected.spec.planned_runs
    )
    return ExperimentComparison(
        bug_identifier=buggy.spec.bug_identifier,
        alpha=alpha,
        tests=tests,
        significant_metrics=significant,
        truncated_to=k,
        buggy_completed=buggy.completed_runs,
        corrected_completed=corrected.completed_runs,
        dagger=dagger,
    )


# --------------------------------------------------------------------------
# Descriptive statistics


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: Optional[float]  # sample std (N-1); None below 2 runs
    minimum: float
    maximum: float
    count: int


@dataclass(frozen=True)
class DescriptiveSummary:
    metrics: dict  # metric name -> MetricSummary

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]


def descriptive(results: ExperimentResults) -> DescriptiveSummary:
    """Per-metric mean/std/min/max over an experiment's runs."""
    if results.completed_runs == 0:
        raise InsufficientData("experiment has no completed runs")
    summaries = {}
    for name in METRIC_NAMES:
        values = np.asarray(results.metric_values(name), dtype=float)
        std = float(np.std(values, ddof=1)) if values.size >= 2 else None
        summaries[name] = MetricSummary(
            mean=float(values.mean()),
            std=std,
            minimum=float(values.min()),
            maximum=float(values.max()),
            count=int(values.size),
        )
    return DescriptiveSummary(metrics=summaries)
