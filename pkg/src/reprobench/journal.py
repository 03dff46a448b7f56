"""Crash-safe append-only record journal.

Line layout: ``<canonical record>|<crc32 hex>\\n`` where the CRC covers the
record bytes. Appends are flushed and fsynced before returning, so a record
is either fully committed (verifiable CRC + newline) or it is a torn tail
from a crash mid-write.

Recovery rules on open:
  * every committed line must verify its CRC; a bad line that is *followed*
    by more data means the file was damaged in place -> ``CorruptJournal``;
  * an unverifiable *final* fragment is a torn write: it is dropped and the
    file is truncated back to the last committed byte.
"""

import os
import zlib

from .errors import CorruptJournal, StorageError
from .records import decode_record, encode_record

_SEPARATOR = b"|"


def _crc_hex(payload: bytes) -> bytes:
    return format(zlib.crc32(payload) & 0xFFFFFFFF, "08x").encode("ascii")


def _parse_line(line: bytes):
    """Return the decoded record for one committed line, or raise ValueError."""
    try:
        payload, crc = line.rsplit(_SEPARATOR, 1)
    except ValueError:
        raise ValueError("missing checksum separator") from None
    if len(crc) != 8:
        raise ValueError(f"checksum must be 8 hex chars, got {len(crc)}")
    if crc != _crc_hex(payload):
        raise ValueError("checksum mismatch")
    return decode_record(payload)


def replay(path) -> list[dict]:
    """Read all committed records, ignoring a torn trailing fragment."""
    records, _, _ = _scan(path)
    return records


def _scan(path):
    """Parse the journal.

    Returns (records, committed_byte_length, terminated): ``terminated`` is
    False when the final committed record lost its newline to a crash, so
    the writer must restore the line terminator before appending more.
    """
    if not os.path.exists(path):
        return [], 0, True
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read journal {path}: {exc}") from exc

    records = []
    committed = 0
    terminated = True
    offset = 0
    line_number = 0
    while offset < len(data):
        line_number += 1
        newline = data.find(b"\n", offset)
        terminated = newline != -1
        end = newline if terminated else len(data)
        line = data[offset:end]
        try:
            record = _parse_line(line)
        except ValueError as exc:
            if terminated:
                # A newline-terminated bad line was written whole and then
                # damaged in place; that is corruption, not a torn append.
                raise CorruptJournal(line_number, str(exc)) from None
            terminated = True  # committed region still ends at a newline
            break  # torn tail, drop it
        records.append(record)
        committed = end + 1 if terminated else end
        if not terminated:
            break  # last line lost only its newline; record still committed
        offset = newline + 1
    return records, committed, terminated


class Journal:
    """Single-writer append log of canonical records."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._records, committed, terminated = _scan(self.path)
        try:
            self._fh = open(self.path, "ab")
            if self._fh.tell() > committed:
                # Discard a torn tail so the next append starts on a clean
                # line boundary; committed lines are never rewritten.
                self._fh.truncate(committed)
            elif not terminated:
                # The final committed record survived but lost its newline;
                # restore the terminator so appends stay line-separated.
                self._fh.write(b"\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise StorageError(f"cannot open journal {self.path}: {exc}") from exc

    @property
    def records(self) -> list[dict]:
        return list(self._records)

    def append(self, record: dict) -> None:
        """Commit one record with a durability barrier before returning."""
        payload = encode_record(record)
        line = payload + _SEPARATOR + _crc_hex(payload) + b"\n"
        try:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            raise StorageError(f"cannot append to journal {self.path}: {exc}") from exc
        self._records.append(record)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "Journal":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
