"""The central benchmarking server plus its journal-backed metrics store.

The server owns the seed registry, serves deterministic splits, and
collects run metrics over the framed TCP protocol. Everything it knows is
reconstructed from two append-only journals, so restarting it (or killing
it mid-run) never changes what it serves.

Also home to the synthetic deterministic client used for end-to-end
conformance: it speaks the full protocol and fabricates metrics from a
seeded Gaussian profile instead of training a real model.
"""

import logging
import math
import socket
import socketserver
import threading
from dataclasses import dataclass, field

from .errors import (
    ChallengeTooSmall,
    FrameTooLarge,
    IntegrityError,
    InvalidRecord,
    ProtocolError,
    ServerErrorReply,
    StorageError,
    UnknownExperiment,
    UnknownMessage,
)
from .journal import Journal, replay as replay_journal
from .model import ChallengeManifest, ExperimentResults, ExperimentSpec, RunMetrics
from .protocol import (
    ERR_CHALLENGE_TOO_SMALL,
    ERR_DUPLICATE_RUN,
    ERR_HALTED,
    ERR_INVALID_METRIC,
    ERR_SEED_MISMATCH,
    ERR_SPEC_CONFLICT,
    ERR_UNKNOWN_CHALLENGE,
    ERR_UNKNOWN_EXPERIMENT,
    PROTOCOL_VERSION,
    Error,
    Hello,
    HelloAck,
    Message,
    MetricsAck,
    Phase,
    Register,
    Registered,
    RequestSplit,
    ServerBackend,
    SessionState,
    Split,
    SubmitMetrics,
    read_frame,
    session_step,
    write_frame,
)
from .records import decode_record, encode_seed, read_records
from .seeds import SeedRegistry, derive_subseed
from .splitting import SplitMix64, chain_checksum, make_split

logger = logging.getLogger(__name__)

__all__ = [
    "ServerConfig",
    "MetricsStore",
    "BenchServer",
    "TrainerProfile",
    "synthesize_run_metrics",
    "synthetic_client_run",
    "load_results",
]


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ServerConfig:
    listen_address: str = "127.0.0.1:0"
    seed_journal: str = "seeds.journal"
    metrics_journal: str = "metrics.journal"
    manifests: tuple = ()
    halt_on_mismatch: bool = False
    master_key: bytes = b""

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit():
            raise InvalidRecord(f"listen_address must be host:port, got {self.listen_address!r}")
        return host, int(port)

    @classmethod
    def from_record(cls, record: dict) -> "ServerConfig":
        try:
            return cls(
                listen_address=record["listen_address"],
                seed_journal=record["seed_journal"],
                metrics_journal=record["metrics_journal"],
                manifests=tuple(record.get("manifests", ())),
                halt_on_mismatch=bool(record.get("halt_on_mismatch", False)),
                master_key=bytes.fromhex(record.get("master_key", "")),
            )
        except KeyError as exc:
            raise InvalidRecord(f"server config missing field {exc}") from None

    @classmethod
    def load(cls, path) -> "ServerConfig":
        with open(path, "rb") as fh:
            first = fh.readline().rstrip(b"\n")
        if not first:
            raise InvalidRecord(f"config file {path} is empty")
        return cls.from_record(decode_record(first))


def load_manifests(paths) -> dict[str, ChallengeManifest]:
    manifests = {}
    for path in paths:
        try:
            records = read_records(path)
        except OSError as exc:
            raise StorageError(f"cannot read manifest {path}: {exc}") from exc
        for record in records:
            manifest = ChallengeManifest.from_record(record)
            if manifest.challenge_id in manifests:
                raise InvalidRecord(f"duplicate challenge id {manifest.challenge_id!r}")
            manifests[manifest.challenge_id] = manifest
    return manifests


# --------------------------------------------------------------------------
# Metrics store


def _results_from_journal(records) -> dict[str, ExperimentResults]:
    results: dict[str, ExperimentResults] = {}
    for record in records:
        kind = record.get("kind")
        if kind == "experiment":
            spec = ExperimentSpec.from_record(record["spec"])
            results.setdefault(spec.experiment_key, ExperimentResults(spec=spec))
        elif kind == "run":
            key = record["experiment_key"]
            if key not in results:
                raise InvalidRecord(f"run record for unregistered experiment {key!r}")
            run = RunMetrics.from_record(record["run"])
            results[key] = results[key].with_run(run)
        else:
            raise InvalidRecord(f"unknown metrics journal record kind {kind!r}")
    return results


def load_results(journal_path) -> dict[str, ExperimentResults]:
    """Read-only replay of a metrics journal into exported results."""
    return _results_from_journal(replay_journal(journal_path))


class MetricsStore:
    """Journal-backed map of experiment_key -> ExperimentResults.

    The journal holds two record kinds: the registered experiment spec and
    one record per accepted run. Replay rebuilds the exact in-memory state;
    duplicate (key, run_index) submissions are refused before anything is
    written.
    """

    def __init__(self, journal_path):
        self._journal = Journal(journal_path)
        self._lock = threading.Lock()
        self._results = _results_from_journal(self._journal.records)

    def add_experiment(self, spec: ExperimentSpec) -> str:
        """Returns "created", "exists", or "conflict"."""
        with self._lock:
            existing = self._results.get(spec.experiment_key)
            if existing is not None:
                return "exists" if existing.spec == spec else "conflict"
            self._journal.append({"kind": "experiment", "spec": spec.to_record()})
            self._results[spec.experiment_key] = ExperimentResults(spec=spec)
            return "created"

    def add_run(self, experiment_key: str, run: RunMetrics) -> str:
        """Returns "ok", "duplicate", or "unknown"; journals before mutating."""
        with self._lock:
            results = self._results.get(experiment_key)
            if results is None:
                return "unknown"
            if any(r.run_index == run.run_index for r in results.runs):
                return "duplicate"
            self._journal.append(
                {"kind": "run", "experiment_key": experiment_key, "run": run.to_record()}
            )
            self._results[experiment_key] = results.with_run(run)
            return "ok"

    def get(self, experiment_key: str):
        with self._lock:
            return self._results.get(experiment_key)

    def export(self, experiment_key: str) -> ExperimentResults:
        results = self.get(experiment_key)
        if results is None:
            raise UnknownExperiment(f"no experiment registered under {experiment_key!r}")
        return results

    def keys(self) -> list[str]:
        with self._lock:
            return sorted(self._results)

    def close(self) -> None:
        self._journal.close()


# --------------------------------------------------------------------------
# Protocol backend


class _Backend(ServerBackend):
    def __init__(self, registry: SeedRegistry, store: MetricsStore,
                 manifests: dict[str, ChallengeManifest]):
        self.registry = registry
        self.store = store
        self.manifests = manifests

    def register(self, spec: ExperimentSpec) -> Message:
        manifest = self.manifests.get(spec.challenge)
        if manifest is None:
            return Error(ERR_UNKNOWN_CHALLENGE, f"no manifest for challenge {spec.challenge!r}")
        status = self.store.add_experiment(spec)
        if status == "conflict":
            return Error(
                ERR_SPEC_CONFLICT,
                f"{spec.experiment_key} already registered with different attributes",
            )
        record = self.registry.get_or_create(spec.experiment_key)
        # Checkpoint the generation before the derived seeds leave the server.
        record = self.registry.issue_generation(spec.experiment_key)
        return Registered(
            root_seed=encode_seed(record.root_seed),
            split_seed=encode_seed(record.subseed("split", 0)),
            client_rng_seed=encode_seed(record.subseed("client-rng", 0)),
        )

    def request_split(self, experiment_key: str, run_index: int, echoed_seed: str) -> Message:
        results = self.store.get(experiment_key)
        record = self.registry.lookup(experiment_key)
        if results is None or record is None:
            return Error(ERR_UNKNOWN_EXPERIMENT, f"unknown experiment {experiment_key!r}")
        if echoed_seed != encode_seed(record.root_seed):
            return Error(ERR_SEED_MISMATCH, "echoed seed does not match the journaled seed")
        manifest = self.manifests.get(results.spec.challenge)
        if manifest is None:
            return Error(ERR_UNKNOWN_CHALLENGE, f"no manifest for {results.spec.challenge!r}")
        try:
            assignment = make_split(manifest, record.subseed("split", 0), run_index)
        except ChallengeTooSmall as exc:
            return Error(ERR_CHALLENGE_TOO_SMALL, str(exc))
        return Split.from_assignment(assignment, manifest.content_digest())

    def submit_metrics(self, request: SubmitMetrics) -> Message:
        values = request.metric_floats()
        if values is None:
            return Error(ERR_INVALID_METRIC, "metrics must be decimals in [0,1]")
        run = RunMetrics(run_index=request.run_index, **values)
        status = self.store.add_run(request.experiment_key, run)
        if status == "unknown":
            return Error(ERR_UNKNOWN_EXPERIMENT, f"unknown experiment {request.experiment_key!r}")
        if status == "duplicate":
            return Error(ERR_DUPLICATE_RUN, f"run {request.run_index} already recorded")
        return MetricsAck(run_index=request.run_index)


# --------------------------------------------------------------------------
# TCP server


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: BenchServer = self.server.bench  # type: ignore[attr-defined]
        if server.halted:
            write_frame(self.wfile, Error(ERR_HALTED, "server halted after seed mismatch"))
            return
        state = SessionState()
        while state.phase is not Phase.TERMINATED:
            try:
                incoming = read_frame(self.rfile)
            except (ProtocolError, UnknownMessage, FrameTooLarge) as exc:
                try:
                    write_frame(self.wfile, Error("PROTOCOL", str(exc)))
                except OSError:
                    pass
                return
            if incoming is None:
                return  # client closed cleanly
            state, response = session_step(state, incoming, server.backend)
            if response is not None:
                try:
                    write_frame(self.wfile, response)
                except OSError:
                    return
            if state.seed_mismatch:
                server.note_seed_mismatch()


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class BenchServer:
    """Long-running benchmarking service bound to one config.

    ``serve_forever`` blocks (CLI use); ``start``/``stop`` run the accept
    loop on a background thread (tests, demos).
    """

    def __init__(self, config: ServerConfig):
        self.config = config
        self.manifests = load_manifests(config.manifests)
        try:
            self.registry = SeedRegistry(config.seed_journal, master_key=config.master_key)
            self.store = MetricsStore(config.metrics_journal)
        except StorageError:
            raise
        self.backend = _Backend(self.registry, self.store, self.manifests)
        self.halted = False
        self._halt_lock = threading.Lock()
        host, port = config.host_port
        try:
            self._tcp = _TCPServer((host, port), _SessionHandler)
        except OSError as exc:
            self.registry.close()
            self.store.close()
            raise StorageError(f"cannot bind {config.listen_address}: {exc}") from exc
        self._tcp.bench = self  # type: ignore[attr-defined]
        self._thread = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def note_seed_mismatch(self) -> None:
        with self._halt_lock:
            if self.config.halt_on_mismatch and not self.halted:
                self.halted = True
                logger.error("seed mismatch detected; refusing further sessions")
            elif not self.config.halt_on_mismatch:
                logger.warning("seed mismatch detected; session terminated")

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        logger.info("serving on %s:%d", *self.address)
        self._tcp.serve_forever()

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.registry.close()
        self.store.close()

    def export_results(self, experiment_key: str) -> ExperimentResults:
        return self.store.export(experiment_key)

    def __enter__(self) -> "BenchServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()


# --------------------------------------------------------------------------
# Synthetic deterministic client


@dataclass(frozen=True)
class TrainerProfile:
    """Gaussian metric synthesizer standing in for a real training run.

    Each metric is mean + spread * z with z standard normal from the run's
    SplitMix64 stream (Box-Muller), clamped into [0,1]. ``epochs_effect``
    shifts every mean by ``epochs_effect * ln(epochs)`` so epoch counts can
    matter when a study wants them to; it defaults to no effect.
    """

    mean: float = 0.7
    spread: float = 0.0
    epochs_effect: float = 0.0
    means: dict = field(default_factory=dict)  # optional per-metric override

    def mean_for(self, metric: str, epochs: int) -> float:
        base = self.means.get(metric, self.mean)
        return base + self.epochs_effect * math.log(epochs)


def _standard_normals(rng: SplitMix64):
    """Box-Muller pairs over uniforms (output+1)/2**64 in (0,1]."""
    while True:
        u1 = rng.next_unit()
        u2 = rng.next_unit()
        radius = math.sqrt(-2.0 * math.log(u1))
        yield radius * math.cos(2.0 * math.pi * u2)
        yield radius * math.sin(2.0 * math.pi * u2)


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def synthesize_run_metrics(
    root_seed: int, run_index: int, profile: TrainerProfile, epochs: int
) -> RunMetrics:
    """One run's fabricated metrics from its derived RNG state.

    This is exactly what the synthetic client submits for that run: the
    stream is reset to the run's sub-seed, then four normals are drawn in
    metric order (accuracy, precision, recall, f1).
    """
    rng = SplitMix64(derive_subseed(root_seed, "client-rng", run_index))
    normals = _standard_normals(rng)
    values = {
        name: _clamp01(profile.mean_for(name, epochs) + profile.spread * next(normals))
        for name in ("accuracy", "precision", "recall", "f1")
    }
    return RunMetrics(run_index=run_index, **values)


class _Connection:
    """One protocol session over a client socket."""

    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self._sock = socket.create_connection(address, timeout=timeout)
        self._rfile = self._sock.makefile("rb")
        self._wfile = self._sock.makefile("wb")

    def call(self, message: Message) -> Message:
        write_frame(self._wfile, message)
        response = read_frame(self._rfile)
        if response is None:
            raise ProtocolError("server closed the connection mid-session")
        if isinstance(response, Error):
            raise ServerErrorReply(response.code, response.detail)
        return response

    def close(self) -> None:
        for closer in (self._rfile.close, self._wfile.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass

    def __enter__(self) -> "_Connection":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def synthetic_client_run(
    address: tuple[str, int],
    spec: ExperimentSpec,
    profile: TrainerProfile,
) -> ExperimentResults:
    """Complete one experiment against a live server with fabricated metrics.

    Per run: the client RNG is reset to the run's derived state, the split
    is fetched and both chain checksums verified, four metrics are drawn
    from the profile, and the run is submitted. Fully deterministic given
    (server seeds, profile).
    """
    results = ExperimentResults(spec=spec)
    with _Connection(address) as conn:
        ack = conn.call(Hello(protocol_version=PROTOCOL_VERSION))
        if not isinstance(ack, HelloAck):
            raise ProtocolError(f"expected HELLO_ACK, got {type(ack).__name__}")
        registered = conn.call(Register(experiment=spec))
        if not isinstance(registered, Registered):
            raise ProtocolError(f"expected REGISTERED, got {type(registered).__name__}")
        root_seed = int(registered.root_seed)
        split_seed = int(registered.split_seed)

        for run_index in range(spec.planned_runs):
            reply = conn.call(RequestSplit(
                experiment_key=spec.experiment_key,
                run_index=run_index,
                echoed_seed=registered.root_seed,
            ))
            if not isinstance(reply, Split):
                raise ProtocolError(f"expected SPLIT, got {type(reply).__name__}")
            _verify_split(reply, split_seed)

            # All client randomness resets to this run's derived state.
            run = synthesize_run_metrics(root_seed, run_index, profile, spec.epochs)
            ack = conn.call(SubmitMetrics(
                experiment_key=spec.experiment_key,
                run_index=run_index,
                accuracy=repr(run.accuracy),
                precision=repr(run.precision),
                recall=repr(run.recall),
                f1=repr(run.f1),
            ))
            if not isinstance(ack, MetricsAck) or ack.run_index != run_index:
                raise ProtocolError("unexpected reply to SUBMIT_METRICS")
            results = results.with_run(run)
    return results


def _verify_split(split: Split, split_seed: int) -> None:
    train = chain_checksum(split_seed, split.train_indices).hex()
    test = chain_checksum(split_seed, split.test_indices).hex()
    if train != split.train_checksum:
        raise IntegrityError("train sequence failed checksum verification")
    if test != split.test_checksum:
        raise IntegrityError("test sequence failed checksum verification")
