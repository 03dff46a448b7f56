"""Client SDK for the reprobench experiment protocol.

Connects a training runtime to a benchmarking server: registration, split
fetching with checksum verification, per-run randomness reset, and metric
submission, with training itself behind a pluggable hook.
"""

from . import wire
from .client import (
    ExperimentRecord,
    ExperimentSpec,
    RunRecord,
    SyntheticTrainerHook,
    TrainerHook,
    run_experiment,
)
from .determinism import (
    SplitMix64,
    AppliedDeterminism,
    apply_runtime_determinism,
    chain_checksum_hex,
    derive_subseed,
)
from .errors import ClientError, HookError, IntegrityError, ProtocolViolation, ServerError

__version__ = "0.1.0"

__all__ = [
    "wire",
    "ExperimentRecord",
    "ExperimentSpec",
    "RunRecord",
    "SyntheticTrainerHook",
    "TrainerHook",
    "run_experiment",
    "SplitMix64",
    "AppliedDeterminism",
    "apply_runtime_determinism",
    "chain_checksum_hex",
    "derive_subseed",
    "ClientError",
    "HookError",
    "IntegrityError",
    "ProtocolViolation",
    "ServerError",
]
