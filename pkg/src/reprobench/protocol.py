"""Framed request/response protocol between clients and the server.

Frame layout (the compatibility contract for third-party clients): a 4-byte
big-endian payload length, then the payload — one canonical record with a
"type" field. Payloads are capped at 16 MiB. Metric values travel as decimal
strings so that integrity is defined over the transmitted bytes rather than
anyone's float re-serialization.

One request gets exactly one response on the same connection; there is no
pipelining. Session ordering is enforced by a pure transition function
(:func:`session_step`) over an explicit :class:`SessionState`, with all
store access behind the :class:`ServerBackend` interface.
"""

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import (
    FrameTooLarge,
    InvalidRecord,
    ProtocolError,
    UnknownMessage,
)
from .model import ExperimentSpec
from .records import decode_record, decode_seed, encode_record
from .splitting import SplitAssignment

PROTOCOL_VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024
_LENGTH_BYTES = 4

# ERROR codes emitted by the session machine / backend.
ERR_BAD_STATE = "BAD_STATE"
ERR_UNSUPPORTED_VERSION = "UNSUPPORTED_VERSION"
ERR_UNKNOWN_EXPERIMENT = "UNKNOWN_EXPERIMENT"
ERR_UNKNOWN_CHALLENGE = "UNKNOWN_CHALLENGE"
ERR_SPEC_CONFLICT = "SPEC_CONFLICT"
ERR_SEED_MISMATCH = "SEED_MISMATCH"
ERR_DUPLICATE_RUN = "DUPLICATE_RUN"
ERR_INVALID_METRIC = "INVALID_METRIC"
ERR_CHALLENGE_TOO_SMALL = "CHALLENGE_TOO_SMALL"
ERR_HALTED = "HALTED"


# --------------------------------------------------------------------------
# Messages


@dataclass(frozen=True)
class Hello:
    protocol_version: int

    def to_payload(self) -> dict:
        return {"type": "HELLO", "protocol_version": self.protocol_version}

    @classmethod
    def from_payload(cls, payload: dict) -> "Hello":
        return cls(protocol_version=_require_int(payload, "protocol_version"))


@dataclass(frozen=True)
class HelloAck:
    protocol_version: int

    def to_payload(self) -> dict:
        return {"type": "HELLO_ACK", "protocol_version": self.protocol_version}

    @classmethod
    def from_payload(cls, payload: dict) -> "HelloAck":
        return cls(protocol_version=_require_int(payload, "protocol_version"))


@dataclass(frozen=True)
class Register:
    experiment: ExperimentSpec

    def to_payload(self) -> dict:
        return {"type": "REGISTER", "experiment": self.experiment.to_record()}

    @classmethod
    def from_payload(cls, payload: dict) -> "Register":
        raw = payload.get("experiment")
        if not isinstance(raw, dict):
            raise ProtocolError("REGISTER requires an 'experiment' object")
        try:
            return cls(experiment=ExperimentSpec.from_record(raw))
        except InvalidRecord as exc:
            raise ProtocolError(f"invalid experiment spec: {exc}") from exc


@dataclass(frozen=True)
class Registered:
    root_seed: str
    split_seed: str
    client_rng_seed: str

    def to_payload(self) -> dict:
        return {
            "type": "REGISTERED",
            "root_seed": self.root_seed,
            "split_seed": self.split_seed,
            "client_rng_seed": self.client_rng_seed,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Registered":
        return cls(
            root_seed=_require_seed_string(payload, "root_seed"),
            split_seed=_require_seed_string(payload, "split_seed"),
            client_rng_seed=_require_seed_string(payload, "client_rng_seed"),
        )


@dataclass(frozen=True)
class RequestSplit:
    experiment_key: str
    run_index: int
    echoed_seed: str

    def to_payload(self) -> dict:
        return {
            "type": "REQUEST_SPLIT",
            "experiment_key": self.experiment_key,
            "run_index": self.run_index,
            "echoed_seed": self.echoed_seed,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RequestSplit":
        return cls(
            experiment_key=_require_str(payload, "experiment_key"),
            run_index=_require_int(payload, "run_index", minimum=0),
            echoed_seed=_require_seed_string(payload, "echoed_seed"),
        )


@dataclass(frozen=True)
class Split:
    run_index: int
    train_indices: tuple
    test_indices: tuple
    train_checksum: str
    test_checksum: str
    manifest_digest: str

    @classmethod
    def from_assignment(cls, assignment: SplitAssignment, manifest_digest: bytes) -> "Split":
        return cls(
            run_index=assignment.run_index,
            train_indices=tuple(assignment.train_indices),
            test_indices=tuple(assignment.test_indices),
            train_checksum=assignment.train_checksum.hex(),
            test_checksum=assignment.test_checksum.hex(),
            manifest_digest=manifest_digest.hex(),
        )

    def to_payload(self) -> dict:
        return {
            "type": "SPLIT",
            "run_index": self.run_index,
            "train_indices": list(self.train_indices),
            "test_indices": list(self.test_indices),
            "train_checksum": self.train_checksum,
            "test_checksum": self.test_checksum,
            "manifest_digest": self.manifest_digest,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Split":
        return cls(
            run_index=_require_int(payload, "run_index", minimum=0),
            train_indices=_require_index_list(payload, "train_indices"),
            test_indices=_require_index_list(payload, "test_indices"),
            train_checksum=_require_hex(payload, "train_checksum"),
            test_checksum=_require_hex(payload, "test_checksum"),
            manifest_digest=_require_hex(payload, "manifest_digest"),
        )


@dataclass(frozen=True)
class SubmitMetrics:
    experiment_key: str
    run_index: int
    accuracy: str
    precision: str
    recall: str
    f1: str

    def to_payload(self) -> dict:
        return {
            "type": "SUBMIT_METRICS",
            "experiment_key": self.experiment_key,
            "run_index": self.run_index,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SubmitMetrics":
        return cls(
            experiment_key=_require_str(payload, "experiment_key"),
            run_index=_require_int(payload, "run_index", minimum=0),
            accuracy=_require_str(payload, "accuracy"),
            precision=_require_str(payload, "precision"),
            recall=_require_str(payload, "recall"),
            f1=_require_str(payload, "f1"),
        )

    def metric_floats(self) -> Optional[dict]:
        """Parse the decimal strings; None if any fails to land in [0,1]."""
        values = {}
        for name in ("accuracy", "precision", "recall", "f1"):
            text = getattr(self, name)
            try:
                value = float(text)
            except ValueError:
                return None
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                return None
            values[name] = value
        return values


@dataclass(frozen=True)
class MetricsAck:
    run_index: int

    def to_payload(self) -> dict:
        return {"type": "METRICS_ACK", "run_index": self.run_index}

    @classmethod
    def from_payload(cls, payload: dict) -> "MetricsAck":
        return cls(run_index=_require_int(payload, "run_index", minimum=0))


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""

    def to_payload(self) -> dict:
        return {"type": "ERROR", "code": self.code, "detail": self.detail}

    @classmethod
    def from_payload(cls, payload: dict) -> "Error":
        return cls(code=_require_str(payload, "code"), detail=_require_str(payload, "detail"))


_MESSAGE_TYPES = {
    "HELLO": Hello,
    "HELLO_ACK": HelloAck,
    "REGISTER": Register,
    "REGISTERED": Registered,
    "REQUEST_SPLIT": RequestSplit,
    "SPLIT": Split,
    "SUBMIT_METRICS": SubmitMetrics,
    "METRICS_ACK": MetricsAck,
    "ERROR": Error,
}

Message = (
    Hello | HelloAck | Register | Registered | RequestSplit | Split
    | SubmitMetrics | MetricsAck | Error
)


def _require_str(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str):
        raise ProtocolError(f"field {key!r} must be a string")
    return value


def _require_int(payload: dict, key: str, minimum: Optional[int] = None) -> int:
    value = payload.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ProtocolError(f"field {key!r} must be an integer")
    if minimum is not None and value < minimum:
        raise ProtocolError(f"field {key!r} must be >= {minimum}")
    return value


def _require_seed_string(payload: dict, key: str) -> str:
    value = _require_str(payload, key)
    try:
        decode_seed(value)
    except InvalidRecord as exc:
        raise ProtocolError(f"field {key!r}: {exc}") from exc
    return value


def _require_hex(payload: dict, key: str) -> str:
    value = _require_str(payload, key)
    if len(value) != 64 or any(c not in "0123456789abcdef" for c in value):
        raise ProtocolError(f"field {key!r} must be 64 lowercase hex chars")
    return value


def _require_index_list(payload: dict, key: str) -> tuple:
    value = payload.get(key)
    if not isinstance(value, list):
        raise ProtocolError(f"field {key!r} must be a list")
    for item in value:
        if not isinstance(item, int) or isinstance(item, bool) or item < 0:
            raise ProtocolError(f"field {key!r} must hold non-negative integers")
    return tuple(value)


# --------------------------------------------------------------------------
# Frame codec


def encode_message(message: Message) -> bytes:
    """Canonical payload bytes for a message (no length prefix)."""
    return encode_record(message.to_payload())


def decode_message(payload: bytes) -> Message:
    """Parse a payload into its message dataclass."""
    try:
        record = decode_record(payload)
    except InvalidRecord as exc:
        raise ProtocolError(str(exc)) from exc
    tag = record.get("type")
    if not isinstance(tag, str):
        raise ProtocolError("payload has no 'type' field")
    cls = _MESSAGE_TYPES.get(tag)
    if cls is None:
        raise UnknownMessage(f"unknown message type {tag!r}")
    return cls.from_payload(record)


def encode_frame(message: Message) -> bytes:
    """Length-prefixed wire bytes for one message."""
    payload = encode_message(message)
    if len(payload) > MAX_PAYLOAD:
        raise FrameTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return len(payload).to_bytes(_LENGTH_BYTES, "big") + payload


def decode_frame(data: bytes) -> Message:
    """Decode one complete frame; rejects truncation and trailing bytes."""
    if len(data) < _LENGTH_BYTES:
        raise ProtocolError("frame shorter than its length prefix")
    declared = int.from_bytes(data[:_LENGTH_BYTES], "big")
    if declared > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {declared} bytes exceeds {MAX_PAYLOAD}")
    payload = data[_LENGTH_BYTES:]
    if len(payload) != declared:
        raise ProtocolError(
            f"frame declares {declared} payload bytes but carries {len(payload)}"
        )
    return decode_message(payload)


def read_frame(stream) -> Optional[Message]:
    """Read one frame from a blocking byte stream; None on clean EOF."""
    header = _read_exact(stream, _LENGTH_BYTES)
    if header is None:
        return None
    declared = int.from_bytes(header, "big")
    if declared > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {declared} bytes exceeds {MAX_PAYLOAD}")
    payload = _read_exact(stream, declared) if declared else b""
    if payload is None:
        raise ProtocolError("stream ended mid-frame")
    return decode_message(payload)


def write_frame(stream, message: Message) -> None:
    stream.write(encode_frame(message))
    stream.flush()


def _read_exact(stream, count: int) -> Optional[bytes]:
    """Read exactly ``count`` bytes; None on EOF at a frame boundary."""
    buf = b""
    while len(buf) < count:
        chunk = stream.read(count - len(buf))
        if not chunk:
            if not buf:
                return None
            raise ProtocolError("stream ended mid-frame")
        buf += chunk
    return buf


# --------------------------------------------------------------------------
# Session state machine


class Phase(enum.Enum):
    AWAIT_HELLO = "await-hello"
    READY = "ready"
    TERMINATED = "terminated"


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.AWAIT_HELLO
    seed_mismatch: bool = field(default=False)  # set when termination was a seed mismatch


class ServerBackend:
    """Store-facing operations the session machine needs.

    Implementations return protocol messages; durable writes happen inside
    these calls so that a response is only produced once its effect is
    committed.
    """

    def register(self, spec: ExperimentSpec) -> Message:
        raise NotImplementedError

    def request_split(self, experiment_key: str, run_index: int, echoed_seed: str) -> Message:
        raise NotImplementedError

    def submit_metrics(self, request: SubmitMetrics) -> Message:
        raise NotImplementedError


def session_step(
    state: SessionState, incoming: Message, backend: ServerBackend
) -> tuple[SessionState, Optional[Message]]:
    """Advance one session by one request.

    Returns the new state plus the response to send (None only from the
    Terminated phase, which absorbs everything). A seed-echo mismatch
    terminates the session: serving data after a detected divergence would
    silently break reproducibility, so the conversation stops there.
    """
    if state.phase is Phase.TERMINATED:
        return state, None

    if state.phase is Phase.AWAIT_HELLO:
        if isinstance(incoming, Hello):
            if incoming.protocol_version != PROTOCOL_VERSION:
                return (
                    replace(state, phase=Phase.TERMINATED),
                    Error(ERR_UNSUPPORTED_VERSION,
                          f"server speaks version {PROTOCOL_VERSION}"),
                )
            return (
                replace(state, phase=Phase.READY),
                HelloAck(protocol_version=incoming.protocol_version),
            )
        return state, Error(ERR_BAD_STATE, "HELLO must open the session")

    # Phase.READY
    if isinstance(incoming, Hello):
        return state, Error(ERR_BAD_STATE, "session already established")
    if isinstance(incoming, Register):
        return state, backend.register(incoming.experiment)
    if isinstance(incoming, RequestSplit):
        response = backend.request_split(
            incoming.experiment_key, incoming.run_index, incoming.echoed_seed
        )
        if isinstance(response, Error) and response.code == ERR_SEED_MISMATCH:
            return replace(state, phase=Phase.TERMINATED, seed_mismatch=True), response
        return state, response
    if isinstance(incoming, SubmitMetrics):
        return state, backend.submit_metrics(incoming)
    # Server-to-client message types arriving at the server are out of order.
    return state, Error(ERR_BAD_STATE, f"unexpected {type(incoming).__name__} from client")
