"""Canonical line-delimited record encoding.

Every persistent file and protocol payload in this package uses the same
encoding: one record per line, rendered as a key-sorted JSON object with no
insignificant whitespace, UTF-8 bytes. 64-bit seed values are carried as
unsigned decimal strings (JSON numbers lose precision past 2**53 in some
runtimes) and digests as lowercase hex strings.

The encoding is canonical: for any record produced by :func:`encode_record`,
``encode_record(decode_record(line)) == line`` byte-exactly, which makes the
files diff-able and lets checksums be defined over the encoded bytes.
"""

import json

from .errors import InvalidRecord

SEED_MAX = 2**64 - 1


def encode_record(record: dict) -> bytes:
    """Render a mapping as one canonical record line (without newline)."""
    try:
        text = json.dumps(
            record, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
            allow_nan=False,
        )
    except (TypeError, ValueError) as exc:
        raise InvalidRecord(f"record not encodable: {exc}") from exc
    return text.encode("utf-8")


def decode_record(data: bytes | str) -> dict:
    """Parse one canonical record line back into a mapping."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidRecord(f"record is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise InvalidRecord(f"record is not parseable: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidRecord("record is not a key/value object")
    return obj


def encode_seed(seed: int) -> str:
    """Render a 64-bit unsigned seed as its decimal string form."""
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise InvalidRecord(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed <= SEED_MAX:
        raise InvalidRecord(f"seed out of 64-bit range: {seed}")
    return str(seed)


def decode_seed(text: str) -> int:
    """Parse a decimal seed string, rejecting signs and non-digits."""
    if not isinstance(text, str) or not text.isdigit():
        raise InvalidRecord(f"seed string must be unsigned decimal, got {text!r}")
    value = int(text)
    if value > SEED_MAX:
        raise InvalidRecord(f"seed out of 64-bit range: {value}")
    return value


def encode_digest(digest: bytes) -> str:
    """Render a 32-byte digest as lowercase hex."""
    if len(digest) != 32:
        raise InvalidRecord(f"digest must be 32 bytes, got {len(digest)}")
    return digest.hex()


def decode_digest(text: str) -> bytes:
    """Parse a 64-char lowercase hex digest."""
    if not isinstance(text, str) or len(text) != 64 or text != text.lower():
        raise InvalidRecord(f"digest must be 64 lowercase hex chars, got {text!r}")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise InvalidRecord(f"digest is not hex: {text!r}") from exc


def read_records(path) -> list[dict]:
    """Load every record line from a canonical record file."""
    out = []
    with open(path, "rb") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip(b"\n")
            if not line:
                continue
            try:
                out.append(decode_record(line))
            except InvalidRecord as exc:
                raise InvalidRecord(f"{path}:{line_number}: {exc}") from exc
    return out


def write_records(path, records) -> None:
    """Write records as one canonical line each."""
    with open(path, "wb") as fh:
        for record in records:
            fh.write(encode_record(record) + b"\n")
