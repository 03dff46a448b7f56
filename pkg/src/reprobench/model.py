"""Domain types for experiments, challenges, runs, and collected metrics.

An *experiment* is the full metric-collection process for one framework
build: N runs, each training over a fixed number of epochs and ending in a
test-set measurement. A buggy/corrected pair of experiments differs only in
its evaluation type and artifact; everything else must match for the pair to
be statistically comparable.
"""

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import InvalidRecord
from .records import decode_digest, decode_seed, encode_digest, encode_record, encode_seed

__all__ = [
    "EvaluationType",
    "ExperimentSpec",
    "ChallengeManifest",
    "RunMetrics",
    "ExperimentResults",
    "PairValidation",
    "validate_experiment_pair",
]

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class EvaluationType(enum.Enum):
    BUGGY = "buggy"
    CORRECTED = "corrected"

    @classmethod
    def parse(cls, text: str) -> "EvaluationType":
        try:
            return cls(text)
        except ValueError:
            raise InvalidRecord(
                f"evaluation_type must be 'buggy' or 'corrected', got {text!r}"
            ) from None


@dataclass(frozen=True)
class ExperimentSpec:
    """Identity and attributes of one experiment.

    ``state`` is the declared 64-bit random-state attribute of the
    experiment; it participates in pair validation as metadata. The seeds
    actually used for splitting and client RNG resets are derived and
    journaled by the server's seed registry and returned at registration
    (clients never choose them).
    """

    bug_identifier: str
    evaluation_type: EvaluationType
    model: str
    challenge: str
    state: int
    artifact: str
    software: str
    epochs: int
    planned_runs: int

    def __post_init__(self):
        if not self.bug_identifier:
            raise InvalidRecord("bug_identifier must be non-empty")
        if "/" in self.bug_identifier:
            raise InvalidRecord("bug_identifier must not contain '/'")
        if not isinstance(self.evaluation_type, EvaluationType):
            raise InvalidRecord("evaluation_type must be an EvaluationType")
        if self.epochs < 1:
            raise InvalidRecord(f"epochs must be >= 1, got {self.epochs}")
        if self.planned_runs < 1:
            raise InvalidRecord(f"planned_runs must be >= 1, got {self.planned_runs}")
        encode_seed(self.state)  # range check

    @property
    def experiment_key(self) -> str:
        """Server-wide unique key: ``bug_identifier/evaluation_type``."""
        return f"{self.bug_identifier}/{self.evaluation_type.value}"

    def to_record(self) -> dict:
        return {
            "bug_identifier": self.bug_identifier,
            "evaluation_type": self.evaluation_type.value,
            "model": self.model,
            "challenge": self.challenge,
            "state": encode_seed(self.state),
            "artifact": self.artifact,
            "software": self.software,
            "epochs": self.epochs,
            "planned_runs": self.planned_runs,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ExperimentSpec":
        try:
            return cls(
                bug_identifier=record["bug_identifier"],
                evaluation_type=EvaluationType.parse(record["evaluation_type"]),
                model=record["model"],
                challenge=record["challenge"],
                state=decode_seed(record["state"]),
                artifact=record["artifact"],
                software=record["software"],
                epochs=int(record["epochs"]),
                planned_runs=int(record["planned_runs"]),
            )
        except KeyError as exc:
            raise InvalidRecord(f"experiment record missing field {exc}") from None


@dataclass(frozen=True)
class ChallengeManifest:
    """Content identity of one dataset: per-item digests in canonical order."""

    challenge_id: str
    item_count: int
    item_digests: tuple
    train_fraction: float

    def __post_init__(self):
        if not self.challenge_id:
            raise InvalidRecord("challenge_id must be non-empty")
        if self.item_count < 0:
            raise InvalidRecord("item_count must be non-negative")
        object.__setattr__(self, "item_digests", tuple(self.item_digests))
        if len(self.item_digests) != self.item_count:
            raise InvalidRecord(
                f"manifest lists {len(self.item_digests)} digests "
                f"for item_count {self.item_count}"
            )
        for d in self.item_digests:
            if not isinstance(d, bytes) or len(d) != 32:
                raise InvalidRecord("item digests must be 32-byte values")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidRecord(
                f"train_fraction must be strictly inside (0,1), got {self.train_fraction}"
            )
        if self.item_count >= 2:
            n_train = self.train_size
            if n_train < 1 or self.item_count - n_train < 1:
                raise InvalidRecord(
                    f"train_fraction {self.train_fraction} leaves an empty subset "
                    f"for {self.item_count} items"
                )

    @property
    def train_size(self) -> int:
        return math.ceil(self.train_fraction * self.item_count)

    def to_record(self) -> dict:
        return {
            "challenge_id": self.challenge_id,
            "item_count": self.item_count,
            "item_digests": [encode_digest(d) for d in self.item_digests],
            "train_fraction": self.train_fraction,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ChallengeManifest":
        try:
            return cls(
                challenge_id=record["challenge_id"],
                item_count=int(record["item_count"]),
                item_digests=tuple(decode_digest(d) for d in record["item_digests"]),
                train_fraction=float(record["train_fraction"]),
            )
        except KeyError as exc:
            raise InvalidRecord(f"manifest record missing field {exc}") from None

    def content_digest(self) -> bytes:
        """Digest of the canonical manifest encoding; echoed in SPLIT replies."""
        import hashlib

        return hashlib.sha256(encode_record(self.to_record())).digest()


@dataclass(frozen=True)
class RunMetrics:
    """Test-set classification metrics for one completed run."""

    run_index: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    def __post_init__(self):
        if self.run_index < 0:
            raise InvalidRecord(f"run_index must be non-negative, got {self.run_index}")
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvalidRecord(f"{name} must be a number, got {value!r}")
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                raise InvalidRecord(f"{name} must lie in [0,1], got {value}")

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise InvalidRecord(f"unknown metric {name!r}")
        return getattr(self, name)

    def to_record(self) -> dict:
        return {
            "run_index": self.run_index,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    @classmethod
    def from_record(cls, record: dict) -> "RunMetrics":
        try:
            return cls(
                run_index=int(record["run_index"]),
                accuracy=float(record["accuracy"]),
                precision=float(record["precision"]),
                recall=float(record["recall"]),
                f1=float(record["f1"]),
            )
        except KeyError as exc:
            raise InvalidRecord(f"run record missing field {exc}") from None


@dataclass(frozen=True)
class ExperimentResults:
    """All collected runs for one experiment, ordered by run index.

    Gaps in the run indices mean the missing runs were aborted client-side
    and never submitted; ``completed_runs`` counts what actually arrived.
    """

    spec: ExperimentSpec
    runs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        indices = [r.run_index for r in self.runs]
        if indices != sorted(indices) or len(set(indices)) != len(indices):
            raise InvalidRecord("runs must be ordered by unique run_index")

    @property
    def completed_runs(self) -> int:
        return len(self.runs)

    @property
    def shortfall(self) -> int:
        """How many planned runs never completed (0 when the plan was met)."""
        return max(0, self.spec.planned_runs - self.completed_runs)

    def metric_values(self, name: str) -> list:
        return [run.metric(name) for run in self.runs]

    def with_run(self, run: RunMetrics) -> "ExperimentResults":
        merged = sorted(self.runs + (run,), key=lambda r: r.run_index)
        return replace(self, runs=tuple(merged))

    def truncated(self, count: int) -> "ExperimentResults":
        """Keep the first ``count`` runs by ascending run index."""
        return replace(self, runs=self.runs[:count])


# Attribute comparison order for pair validation; fixed so that the mismatch
# list is identical regardless of argument order.
_PAIR_MATCHED_FIELDS = (
    "bug_identifier",
    "model",
    "challenge",
    "state",
    "software",
    "epochs",
)


@dataclass(frozen=True)
class PairValidation:
    ok: bool
    mismatches: tuple

    def __bool__(self) -> bool:
        return self.ok


def validate_experiment_pair(buggy: ExperimentSpec, corrected: ExperimentSpec) -> PairValidation:
    """Check that two experiments are comparable as a buggy/corrected pair.

    Every attribute except the evaluation type and the artifact must be
    equal; the evaluation types themselves must differ. The artifact is the
    one attribute expected to change with the fix, so it is never compared.
    """
    mismatches = [
        name
        for name in _PAIR_MATCHED_FIELDS
        if getattr(buggy, name) != getattr(corrected, name)
    ]
    if buggy.evaluation_type == corrected.evaluation_type:
        mismatches.append("evaluation_type must differ")
    return PairValidation(ok=not mismatches, mismatches=tuple(mismatches))
