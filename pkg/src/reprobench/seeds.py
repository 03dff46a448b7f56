"""Deterministic seed derivation and crash-safe seed journaling.

Seeds are keyed-hash *derivations*, not random samples: the journal is a
cache of what was issued, never the source of truth. Losing the file can
therefore never lose a seed — re-running the same registrations against the
same master key reproduces every value exactly.
"""

import hashlib
import threading
import time
from dataclasses import dataclass, replace

from .errors import InvalidKey, InvalidPurpose
from .journal import Journal
from .records import decode_seed, encode_seed

__all__ = [
    "SUBSEED_PURPOSES",
    "derive_root_seed",
    "derive_subseed",
    "SeedRecord",
    "SeedRegistry",
]

# Domain separator between master key and experiment key in the root
# derivation; keeps ("ab", "c") and ("a", "bc") distinct.
_KEY_SEPARATOR = b"\x1f"

SUBSEED_PURPOSES = ("split", "client-rng")


def derive_root_seed(master_key: bytes, experiment_key: str) -> int:
    """Root seed for an experiment: first 8 bytes (big-endian) of
    SHA-256(master_key || 0x1F || experiment_key)."""
    if not experiment_key:
        raise InvalidKey("experiment_key must be non-empty")
    digest = hashlib.sha256(
        master_key + _KEY_SEPARATOR + experiment_key.encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


def derive_subseed(root, purpose: str, index: int) -> int:
    """Per-consumer seed: first 8 bytes (big-endian) of
    SHA-256(BE64(root_seed) || purpose || BE64(index)).

    ``root`` is a :class:`SeedRecord` or a bare root seed. ``purpose`` picks
    the consumer stream ("split" for data splitting, "client-rng" for the
    client's runtime RNG); ``index`` gives each run its own re-derivable
    state within a stream. Pure function; never touches the generation
    counter.
    """
    if purpose not in SUBSEED_PURPOSES:
        raise InvalidPurpose(f"unknown purpose {purpose!r}; expected one of {SUBSEED_PURPOSES}")
    if index < 0:
        raise InvalidKey(f"subseed index must be non-negative, got {index}")
    root_seed = root.root_seed if isinstance(root, SeedRecord) else int(root)
    material = (
        root_seed.to_bytes(8, "big")
        + purpose.encode("utf-8")
        + int(index).to_bytes(8, "big")
    )
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


@dataclass(frozen=True)
class SeedRecord:
    """Journaled seed state for one experiment key.

    ``generation`` counts how many times sub-seeds have been issued for this
    experiment; it is persisted before the corresponding sub-seeds are
    released, so a crash can never hand out seeds the journal knows nothing
    about.
    """

    experiment_key: str
    root_seed: int
    generation: int = 0
    created_at: float = 0.0  # informational only; never feeds derivations

    def subseed(self, purpose: str, index: int) -> int:
        return derive_subseed(self.root_seed, purpose, index)

    def to_record(self) -> dict:
        return {
            "experiment_key": self.experiment_key,
            "root_seed": encode_seed(self.root_seed),
            "generation": self.generation,
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "SeedRecord":
        return cls(
            experiment_key=record["experiment_key"],
            root_seed=decode_seed(record["root_seed"]),
            generation=int(record["generation"]),
            created_at=float(record["created_at"]),
        )


class SeedRegistry:
    """Journal-backed registry of per-experiment seeds.

    All writes go through one lock (single serialized writer); reads of
    committed records are plain dict lookups and safe from any thread.
    """

    def __init__(self, journal_path, master_key: bytes = b""):
        self.master_key = master_key
        self._journal = Journal(journal_path)
        self._records: dict[str, SeedRecord] = {}
        self._write_lock = threading.Lock()
        for raw in self._journal.records:
            record = SeedRecord.from_record(raw)
            self._records[record.experiment_key] = record  # later lines win

    def get_or_create(self, experiment_key: str) -> SeedRecord:
        """Return the journaled record for a key, creating it durably first
        if this is the key's first appearance."""
        if not experiment_key:
            raise InvalidKey("experiment_key must be non-empty")
        with self._write_lock:
            existing = self._records.get(experiment_key)
            if existing is not None:
                return existing
            record = SeedRecord(
                experiment_key=experiment_key,
                root_seed=derive_root_seed(self.master_key, experiment_key),
                generation=0,
                created_at=time.time(),
            )
            self._journal.append(record.to_record())
            self._records[experiment_key] = record
            return record

    def issue_generation(self, experiment_key: str) -> SeedRecord:
        """Bump and persist the generation counter, then return the record.

        Callers must invoke this before releasing sub-seeds derived for the
        new generation; the append is fsynced, so the checkpoint survives an
        immediate crash.
        """
        with self._write_lock:
            current = self._records.get(experiment_key)
            if current is None:
                raise InvalidKey(f"unknown experiment_key {experiment_key!r}")
            bumped = replace(current, generation=current.generation + 1)
            self._journal.append(bumped.to_record())
            self._records[experiment_key] = bumped
            return bumped

    def lookup(self, experiment_key: str):
        return self._records.get(experiment_key)

    def close(self) -> None:
        self._journal.close()

    def __enter__(self) -> "SeedRegistry":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
