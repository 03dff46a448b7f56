import io
import json

import pytest

from conftest import FIXTURES_DIR
from repro_client import wire
from repro_client.errors import ProtocolViolation


def load_golden():
    frames = {}
    for line in (FIXTURES_DIR / "golden_frames.records").read_bytes().splitlines():
        record = json.loads(line)
        frames[record["name"]] = bytes.fromhex(record["frame_hex"])
    return frames


class TestGoldenFrames:
    def test_replay_every_frame_byte_identically(self):
        for name, frame in load_golden().items():
            payload = wire.decode_payload(frame[4:])
            assert wire.encode_frame(payload) == frame, name

    def test_request_constructors_match_golden_bytes(self):
        golden = load_golden()
        assert wire.encode_frame(wire.hello()) == golden["hello"]
        assert wire.encode_frame(
            wire.request_split("study-pr31433/buggy", 0, "9531888692967303985")
        ) == golden["request_split"]
        assert wire.encode_frame(
            wire.submit_metrics(
                "study-pr31433/buggy", 0,
                {"accuracy": "0.7012", "precision": "0.7103",
                 "recall": "0.6988", "f1": "0.7045"},
            )
        ) == golden["submit_metrics"]

    def test_hello_frame_hand_anchor(self):
        expected = b'{"protocol_version":1,"type":"HELLO"}'
        assert wire.encode_frame(wire.hello()) == len(expected).to_bytes(4, "big") + expected


class TestFraming:
    def test_stream_round_trip(self):
        buffer = io.BytesIO()
        wire.write_frame(buffer, wire.hello())
        buffer.seek(0)
        assert wire.read_frame(buffer) == wire.hello()
        assert wire.read_frame(buffer) is None

    def test_truncated_stream_rejected(self):
        frame = wire.encode_frame(wire.hello())
        with pytest.raises(ProtocolViolation):
            wire.read_frame(io.BytesIO(frame[:-2]))

    def test_oversize_declared_length_rejected(self):
        with pytest.raises(ProtocolViolation):
            wire.read_frame(io.BytesIO((2**25).to_bytes(4, "big")))

    def test_untyped_payload_rejected(self):
        with pytest.raises(ProtocolViolation):
            wire.decode_payload(b'{"a":1}')

    def test_registered_seeds_parse(self):
        seeds = wire.RegisteredSeeds.from_payload({
            "type": "REGISTERED",
            "root_seed": "5",
            "split_seed": "6",
            "client_rng_seed": "7",
        })
        assert (seeds.root_seed, seeds.split_seed, seeds.client_rng_seed) == (5, 6, 7)
        with pytest.raises(ProtocolViolation):
            wire.RegisteredSeeds.from_payload({"type": "REGISTERED", "root_seed": "x"})
