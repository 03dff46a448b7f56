"""Client-side implementation of the benchmarking wire protocol.

Frames are a 4-byte big-endian payload length followed by the payload: one
UTF-8 JSON object with lexicographically sorted keys, no insignificant
whitespace, and a "type" tag. Seeds travel as unsigned decimal strings and
metric values as decimal strings, so every byte on the wire is
reproducible regardless of the runtime's float formatting.
"""

import json
from dataclasses import dataclass

from .errors import ProtocolViolation

PROTOCOL_VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024


def encode_payload(payload: dict) -> bytes:
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def decode_payload(data: bytes) -> dict:
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"unparseable payload: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("type"), str):
        raise ProtocolViolation("payload is not a typed object")
    return payload


def encode_frame(payload: dict) -> bytes:
    body = encode_payload(payload)
    if len(body) > MAX_PAYLOAD:
        raise ProtocolViolation(f"payload of {len(body)} bytes exceeds {MAX_PAYLOAD}")
    return len(body).to_bytes(4, "big") + body


def read_frame(stream) -> dict | None:
    """Read one payload from a blocking stream; None on clean EOF."""
    header = _read_exact(stream, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    if length > MAX_PAYLOAD:
        raise ProtocolViolation(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    body = _read_exact(stream, length) if length else b""
    if body is None:
        raise ProtocolViolation("stream ended mid-frame")
    return decode_payload(body)


def write_frame(stream, payload: dict) -> None:
    stream.write(encode_frame(payload))
    stream.flush()


def _read_exact(stream, count: int) -> bytes | None:
    buf = b""
    while len(buf) < count:
        chunk = stream.read(count - len(buf))
        if not chunk:
            if buf:
                raise ProtocolViolation("stream ended mid-frame")
            return None
        buf += chunk
    return buf


# Request constructors (client -> server).


def hello() -> dict:
    return {"type": "HELLO", "protocol_version": PROTOCOL_VERSION}


def register(experiment_record: dict) -> dict:
    return {"type": "REGISTER", "experiment": experiment_record}


def request_split(experiment_key: str, run_index: int, echoed_seed: str) -> dict:
    return {
        "type": "REQUEST_SPLIT",
        "experiment_key": experiment_key,
        "run_index": run_index,
        "echoed_seed": echoed_seed,
    }


def submit_metrics(experiment_key: str, run_index: int, metrics: dict) -> dict:
    payload = {
        "type": "SUBMIT_METRICS",
        "experiment_key": experiment_key,
        "run_index": run_index,
    }
    for name in ("accuracy", "precision", "recall", "f1"):
        payload[name] = metrics[name]
    return payload


@dataclass(frozen=True)
class RegisteredSeeds:
    root_seed: int
    split_seed: int
    client_rng_seed: int

    @classmethod
    def from_payload(cls, payload: dict) -> "RegisteredSeeds":
        try:
            return cls(
                root_seed=int(payload["root_seed"]),
                split_seed=int(payload["split_seed"]),
                client_rng_seed=int(payload["client_rng_seed"]),
            )
        except (KeyError, ValueError) as exc:
            raise ProtocolViolation(f"bad REGISTERED payload: {exc}") from exc
