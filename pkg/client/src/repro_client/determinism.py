"""Seed derivation, split verification, and runtime randomness control.

The derivations mirror the server's published contract bit-for-bit, so the
client can re-derive every per-run state from the REGISTERED root seed and
verify served splits without trusting the transport.
"""

import hashlib
import random
import sys
from dataclasses import dataclass, field

MASK64 = (1 << 64) - 1

SUBSEED_PURPOSES = ("split", "client-rng")


class SplitMix64:
    """The protocol's PRNG: five lines, published test vectors."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform in (0, 1]: (output + 1) / 2**64."""
        return (self.next_u64() + 1) / 2.0**64


def derive_subseed(root_seed: int, purpose: str, index: int) -> int:
    """First 8 bytes (big-endian) of SHA-256(BE64(root) || purpose || BE64(index))."""
    if purpose not in SUBSEED_PURPOSES:
        raise ValueError(f"unknown purpose {purpose!r}")
    material = (
        (root_seed & MASK64).to_bytes(8, "big")
        + purpose.encode("utf-8")
        + index.to_bytes(8, "big")
    )
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def chain_checksum_hex(seed: int, indices) -> str:
    """Order-sensitive digest: d0 = SHA-256(BE64(seed)), then each index
    folds in as SHA-256(d || BE64(index))."""
    digest = hashlib.sha256((seed & MASK64).to_bytes(8, "big")).digest()
    for index in indices:
        digest = hashlib.sha256(digest + int(index).to_bytes(8, "big")).digest()
    return digest.hex()


# Runtimes the SDK knows how to make deterministic. Only runtimes the
# process has actually imported get seeded: seeding a framework the hook
# never loaded would control nothing.
_KNOWN_RUNTIMES = ("numpy", "torch", "tensorflow")


@dataclass
class AppliedDeterminism:
    """Run-log entry: which reproducibility mechanisms were configured."""

    seed: int
    applied: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def apply_runtime_determinism(client_rng_seed: int) -> AppliedDeterminism:
    """Reset every available global RNG to the run's seed.

    The base generator is always reseeded. Imported ML runtimes get their
    framework-specific switches; runtimes that are not loaded are recorded
    as warnings, since their randomness cannot be controlled from here.
    """
    log = AppliedDeterminism(seed=client_rng_seed)

    random.seed(client_rng_seed)
    log.applied.append("random.seed")

    for name in _KNOWN_RUNTIMES:
        module = sys.modules.get(name)
        if module is None:
            log.warnings.append(f"{name}: not loaded, randomness uncontrolled")
            continue
        try:
            if name == "numpy":
                module.random.seed(client_rng_seed % (2**32))
                log.applied.append("numpy.random.seed")
            elif name == "torch":
                module.manual_seed(client_rng_seed % (2**63))
                log.applied.append("torch.manual_seed")
                if hasattr(module, "use_deterministic_algorithms"):
                    module.use_deterministic_algorithms(True, warn_only=True)
                    log.applied.append("torch.use_deterministic_algorithms")
                backends = getattr(module, "backends", None)
                if backends is not None and hasattr(backends, "cudnn"):
                    backends.cudnn.deterministic = True
                    backends.cudnn.benchmark = False
                    log.applied.append("torch.backends.cudnn.deterministic")
            elif name == "tensorflow":
                module.random.set_seed(client_rng_seed % (2**63))
                log.applied.append("tensorflow.random.set_seed")
        except Exception as exc:  # control is best-effort by design
            log.warnings.append(f"{name}: {exc}")
    return log
