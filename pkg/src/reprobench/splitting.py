"""Deterministic train/test splitting with order-sensitive checksums.

The generator is SplitMix64: a five-line, language-neutral PRNG with
published test vectors, so any client runtime can reproduce the exact
index stream bit-for-bit. Index order matters (it is the order data is fed
to training), so subset integrity is a hash chain over the sequence rather
than a digest of the sorted set.
"""

import hashlib
import math
from dataclasses import dataclass

from .errors import ChallengeTooSmall
from .model import ChallengeManifest

__all__ = [
    "MASK64",
    "splitmix64_next",
    "SplitMix64",
    "seeded_permutation",
    "chain_checksum",
    "SplitAssignment",
    "make_split",
]

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance one SplitMix64 step; returns ``(new_state, output)``."""
    state = (state + _GOLDEN_GAMMA) & MASK64
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    z = z ^ (z >> 31)
    return state, z


class SplitMix64:
    """Stateful wrapper over :func:`splitmix64_next`."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, output = splitmix64_next(self.state)
        return output

    def next_unit(self) -> float:
        """Uniform draw in (0, 1]: ``(output + 1) / 2**64``."""
        return (self.next_u64() + 1) / 2.0**64


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of ``range(n)`` driven by SplitMix64(seed).

    Draw order is fixed: for j = n-1 down to 1, swap position j with
    position ``output mod (j+1)``. The modulo bias is far below anything
    observable at dataset sizes.
    """
    items = list(range(n))
    rng = SplitMix64(seed)
    for j in range(n - 1, 0, -1):
        i = rng.next_u64() % (j + 1)
        items[i], items[j] = items[j], items[i]
    return items


def chain_checksum(seed: int, indices) -> bytes:
    """Order-sensitive digest over an index sequence.

    d0 = SHA-256(BE64(seed)); each index folds in as
    d_k = SHA-256(d_{k-1} || BE64(index_k)). Reordering, dropping, or
    substituting any element changes the result.
    """
    digest = hashlib.sha256((seed & MASK64).to_bytes(8, "big")).digest()
    for index in indices:
        digest = hashlib.sha256(digest + int(index).to_bytes(8, "big")).digest()
    return digest


@dataclass(frozen=True)
class SplitAssignment:
    """Served train/test index sequences for one run, with their checksums."""

    run_index: int
    split_seed: int
    train_indices: tuple
    test_indices: tuple
    train_checksum: bytes
    test_checksum: bytes

    def verify(self) -> bool:
        return (
            chain_checksum(self.split_seed, self.train_indices) == self.train_checksum
            and chain_checksum(self.split_seed, self.test_indices) == self.test_checksum
        )


def make_split(manifest: ChallengeManifest, split_seed: int, run_index: int = 0) -> SplitAssignment:
    """Partition a challenge into ordered train/test index sequences.

    Pure function of (manifest, split_seed): the permutation is drawn once
    and cut at ceil(train_fraction * n). ``run_index`` is carried through
    for audit only; it never influences the split, so every run of an
    experiment trains on identical data in identical order.
    """
    n = manifest.item_count
    if n < 2:
        raise ChallengeTooSmall(
            f"challenge {manifest.challenge_id!r} has {n} items; need at least 2"
        )
    permutation = seeded_permutation(n, split_seed)
    n_train = math.ceil(manifest.train_fraction * n)
    train = tuple(permutation[:n_train])
    test = tuple(permutation[n_train:])
    return SplitAssignment(
        run_index=run_index,
        split_seed=split_seed & MASK64,
        train_indices=train,
        test_indices=test,
        train_checksum=chain_checksum(split_seed, train),
        test_checksum=chain_checksum(split_seed, test),
    )
