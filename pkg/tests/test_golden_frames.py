"""Byte-level protocol pinning against the shared golden-frame fixtures.

These frames are the compatibility contract for any client implementation;
if one of these assertions fails, the wire format changed and every
existing client breaks.
"""

from conftest import FIXTURES_DIR
from reprobench.protocol import decode_frame, encode_frame
from reprobench.records import read_records


def load_golden():
    return read_records(FIXTURES_DIR / "golden_frames.records")


def test_fixture_covers_every_message_type():
    names = {record["name"] for record in load_golden()}
    assert names == {
        "hello", "hello_ack", "register", "registered", "request_split",
        "split", "submit_metrics", "metrics_ack", "error",
    }


def test_golden_frames_decode_and_reencode_byte_identically():
    for record in load_golden():
        frame = bytes.fromhex(record["frame_hex"])
        message = decode_frame(frame)
        assert encode_frame(message) == frame, record["name"]


def test_hello_frame_matches_hand_construction():
    golden = {r["name"]: r for r in load_golden()}
    expected = b'{"protocol_version":1,"type":"HELLO"}'
    assert bytes.fromhex(golden["hello"]["frame_hex"]) == (
        len(expected).to_bytes(4, "big") + expected
    )
