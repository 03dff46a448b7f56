"""Experiment runner: drives a pluggable trainer through the full protocol.

The SDK owns the run loop. Per run it resets all controllable randomness to
the run's derived state, fetches and checksum-verifies the split, hands the
trainer hook its epoch budget, validates the returned metrics, and submits
them. A hook failure aborts that run locally (nothing is submitted); an
integrity failure or a server ERROR aborts the experiment.
"""

import logging
import math
import socket
from dataclasses import dataclass, replace

from . import wire
from .determinism import (
    SplitMix64,
    apply_runtime_determinism,
    chain_checksum_hex,
    derive_subseed,
)
from .errors import HookError, IntegrityError, ProtocolViolation, ServerError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class ExperimentSpec:
    """Registration attributes for one experiment (client view)."""

    bug_identifier: str
    evaluation_type: str  # "buggy" or "corrected"
    model: str
    challenge: str
    state: int
    artifact: str
    software: str
    epochs: int
    planned_runs: int

    def __post_init__(self):
        if self.evaluation_type not in ("buggy", "corrected"):
            raise ValueError("evaluation_type must be 'buggy' or 'corrected'")
        if self.epochs < 1 or self.planned_runs < 1:
            raise ValueError("epochs and planned_runs must be positive")

    @property
    def experiment_key(self) -> str:
        return f"{self.bug_identifier}/{self.evaluation_type}"

    def to_record(self) -> dict:
        return {
            "bug_identifier": self.bug_identifier,
            "evaluation_type": self.evaluation_type,
            "model": self.model,
            "challenge": self.challenge,
            "state": str(self.state),
            "artifact": self.artifact,
            "software": self.software,
            "epochs": self.epochs,
            "planned_runs": self.planned_runs,
        }


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    metrics: dict  # metric name -> float
    mechanisms: tuple  # determinism mechanisms applied for this run


@dataclass(frozen=True)
class ExperimentRecord:
    """The client's local copy of everything it submitted."""

    spec: ExperimentSpec
    seeds: wire.RegisteredSeeds
    runs: tuple = ()
    aborted_runs: tuple = ()  # run indices whose hook failed

    def metric_values(self, name: str) -> list:
        return [run.metrics[name] for run in self.runs]


class TrainerHook:
    """Per-run training contract.

    ``reset`` runs before any training computation each run (after the SDK
    has already reseeded the global generators); ``train`` must perform the
    full epoch budget and return the four test-set metrics in [0, 1]. The
    hook must not consume randomness before its reset was applied.
    """

    def reset(self, client_rng_seed: int) -> None:
        pass

    def train(self, client_rng_seed: int, train_indices, test_indices, epochs: int) -> dict:
        raise NotImplementedError


class SyntheticTrainerHook(TrainerHook):
    """Deterministic stand-in for a real trainer.

    Draws each metric as mean + spread * z (standard normal via Box-Muller
    over the run's SplitMix64 stream, uniforms mapped (output+1)/2**64),
    clamped into [0, 1]. The optional epochs effect shifts every mean by
    epochs_effect * ln(epochs).
    """

    def __init__(self, mean=0.7, spread=0.0, epochs_effect=0.0, means=None):
        self.mean = mean
        self.spread = spread
        self.epochs_effect = epochs_effect
        self.means = dict(means or {})
        self._rng = None
        self._pending = None

    def reset(self, client_rng_seed: int) -> None:
        self._rng = SplitMix64(client_rng_seed)
        self._pending = None

    def _next_normal(self) -> float:
        if self._pending is not None:
            value, self._pending = self._pending, None
            return value
        u1 = self._rng.next_unit()
        u2 = self._rng.next_unit()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._pending = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)

    def train(self, client_rng_seed, train_indices, test_indices, epochs) -> dict:
        metrics = {}
        for name in METRIC_NAMES:
            mean = self.means.get(name, self.mean) + self.epochs_effect * math.log(epochs)
            value = mean + self.spread * self._next_normal()
            metrics[name] = min(1.0, max(0.0, value))
        return metrics


class _Session:
    def __init__(self, address, timeout=30.0):
        self._sock = socket.create_connection(address, timeout=timeout)
        self._rfile = self._sock.makefile("rb")
        self._wfile = self._sock.makefile("wb")

    def call(self, payload: dict) -> dict:
        wire.write_frame(self._wfile, payload)
        response = wire.read_frame(self._rfile)
        if response is None:
            raise ProtocolViolation("server closed the connection")
        if response["type"] == "ERROR":
            raise ServerError(response.get("code", "?"), response.get("detail", ""))
        return response

    def close(self):
        for closer in (self._rfile.close, self._wfile.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def _expect(payload: dict, expected_type: str) -> dict:
    if payload["type"] != expected_type:
        raise ProtocolViolation(f"expected {expected_type}, got {payload['type']}")
    return payload


def _validated_metrics(raw: dict, run_index: int) -> dict:
    metrics = {}
    for name in METRIC_NAMES:
        if name not in raw:
            raise HookError(f"run {run_index}: hook omitted metric {name!r}")
        value = float(raw[name])
        if math.isnan(value) or not 0.0 <= value <= 1.0:
            raise HookError(f"run {run_index}: {name}={value} outside [0,1]")
        metrics[name] = value
    return metrics


def _verify_split(split: dict, split_seed: int) -> None:
    for subset, checksum_field in (("train_indices", "train_checksum"),
                                   ("test_indices", "test_checksum")):
        recomputed = chain_checksum_hex(split_seed, split[subset])
        if recomputed != split[checksum_field]:
            raise IntegrityError(f"{subset} failed checksum verification")


def run_experiment(server_address, spec: ExperimentSpec, hook: TrainerHook) -> ExperimentRecord:
    """Register, then execute and submit every planned run.

    Returns the local record of what was submitted; the server-side export
    must agree with it exactly, which is the SDK's conformance bar.
    """
    with _Session(server_address) as session:
        _expect(session.call(wire.hello()), "HELLO_ACK")
        registered = _expect(session.call(wire.register(spec.to_record())), "REGISTERED")
        seeds = wire.RegisteredSeeds.from_payload(registered)
        record = ExperimentRecord(spec=spec, seeds=seeds)

        for run_index in range(spec.planned_runs):
            run_seed = derive_subseed(seeds.root_seed, "client-rng", run_index)
            determinism_log = apply_runtime_determinism(run_seed)
            hook.reset(run_seed)

            split = _expect(
                session.call(
                    wire.request_split(spec.experiment_key, run_index, str(seeds.root_seed))
                ),
                "SPLIT",
            )
            _verify_split(split, seeds.split_seed)

            try:
                raw = hook.train(
                    run_seed, tuple(split["train_indices"]), tuple(split["test_indices"]),
                    spec.epochs,
                )
                metrics = _validated_metrics(raw, run_index)
            except HookError:
                raise
            except Exception as exc:
                logger.warning("run %d aborted by hook: %s", run_index, exc)
                record = replace(record, aborted_runs=record.aborted_runs + (run_index,))
                continue

            ack = _expect(
                session.call(
                    wire.submit_metrics(
                        spec.experiment_key, run_index,
                        {name: repr(metrics[name]) for name in METRIC_NAMES},
                    )
                ),
                "METRICS_ACK",
            )
            if ack["run_index"] != run_index:
                raise ProtocolViolation("METRICS_ACK for the wrong run")
            record = replace(
                record,
                runs=record.runs + (RunRecord(
                    run_index=run_index,
                    metrics=metrics,
                    mechanisms=tuple(determinism_log.applied),
                ),),
            )
        return record
