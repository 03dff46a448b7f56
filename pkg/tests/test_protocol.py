import io

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_spec
from reprobench.errors import FrameTooLarge, ProtocolError, UnknownMessage
from reprobench.model import EvaluationType
from reprobench.protocol import (
    ERR_BAD_STATE,
    ERR_DUPLICATE_RUN,
    ERR_SEED_MISMATCH,
    ERR_UNSUPPORTED_VERSION,
    MAX_PAYLOAD,
    PROTOCOL_VERSION,
    Error,
    Hello,
    HelloAck,
    MetricsAck,
    Phase,
    Register,
    Registered,
    RequestSplit,
    ServerBackend,
    SessionState,
    Split,
    SubmitMetrics,
    decode_frame,
    encode_frame,
    read_frame,
    session_step,
    write_frame,
)

seed_strings = st.integers(min_value=0, max_value=2**64 - 1).map(str)
hex_digests = st.binary(min_size=32, max_size=32).map(lambda b: b.hex())
index_lists = st.lists(st.integers(min_value=0, max_value=10**6), max_size=20).map(tuple)
safe_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=20
)
metric_strings = st.floats(min_value=0, max_value=1, allow_nan=False).map(repr)

message_strategies = st.one_of(
    st.builds(Hello, protocol_version=st.integers(0, 100)),
    st.builds(HelloAck, protocol_version=st.integers(0, 100)),
    st.builds(
        Registered,
        root_seed=seed_strings,
        split_seed=seed_strings,
        client_rng_seed=seed_strings,
    ),
    st.builds(
        RequestSplit,
        experiment_key=safe_text,
        run_index=st.integers(0, 10**6),
        echoed_seed=seed_strings,
    ),
    st.builds(
        Split,
        run_index=st.integers(0, 10**6),
        train_indices=index_lists,
        test_indices=index_lists,
        train_checksum=hex_digests,
        test_checksum=hex_digests,
        manifest_digest=hex_digests,
    ),
    st.builds(
        SubmitMetrics,
        experiment_key=safe_text,
        run_index=st.integers(0, 10**6),
        accuracy=metric_strings,
        precision=metric_strings,
        recall=metric_strings,
        f1=metric_strings,
    ),
    st.builds(MetricsAck, run_index=st.integers(0, 10**6)),
    st.builds(Error, code=safe_text, detail=st.text(max_size=30)),
    st.builds(
        Register,
        experiment=st.builds(
            make_spec,
            bug_identifier=st.text(
                alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=12
            ),
            evaluation_type=st.sampled_from(EvaluationType),
            state=st.integers(0, 2**64 - 1),
            epochs=st.integers(1, 100),
            planned_runs=st.integers(1, 100),
        ),
    ),
)


class TestFraming:
    def test_hello_frame_layout_hand_checked(self):
        frame = encode_frame(Hello(protocol_version=1))
        assert frame == b'\x00\x00\x00\x25{"protocol_version":1,"type":"HELLO"}'
        assert decode_frame(frame) == Hello(protocol_version=1)

    @settings(max_examples=200)
    @given(message_strategies)
    def test_round_trip_identity(self, message):
        assert decode_frame(encode_frame(message)) == message

    def test_zero_length_payload_rejected(self):
        with pytest.raises(ProtocolError):
            decode_frame(b"\x00\x00\x00\x00")

    def test_payload_without_type_rejected(self):
        payload = b'{"a":1}'
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(ProtocolError):
            decode_frame(frame)

    def test_unknown_type_rejected(self):
        payload = b'{"type":"NOPE"}'
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(UnknownMessage):
            decode_frame(frame)

    def test_oversize_declared_length_rejected_before_payload(self):
        header = (2**25).to_bytes(4, "big")
        with pytest.raises(FrameTooLarge):
            decode_frame(header)  # no payload attached at all
        with pytest.raises(FrameTooLarge):
            read_frame(io.BytesIO(header))
        assert MAX_PAYLOAD == 16 * 1024 * 1024

    def test_truncation_rejected(self):
        frame = encode_frame(Hello(protocol_version=1))
        with pytest.raises(ProtocolError):
            decode_frame(frame[:-3])
        with pytest.raises(ProtocolError):
            decode_frame(frame + b"xx")
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(frame[:-3]))

    def test_stream_round_trip(self):
        buffer = io.BytesIO()
        write_frame(buffer, Hello(protocol_version=1))
        write_frame(buffer, MetricsAck(run_index=4))
        buffer.seek(0)
        assert read_frame(buffer) == Hello(protocol_version=1)
        assert read_frame(buffer) == MetricsAck(run_index=4)
        assert read_frame(buffer) is None  # clean EOF


class RecordingBackend(ServerBackend):
    """Minimal in-memory backend for session-machine tests."""

    def __init__(self, root_seed="1111"):
        self.root_seed = root_seed
        self.submitted = {}

    def register(self, spec):
        return Registered(root_seed=self.root_seed, split_seed="2", client_rng_seed="3")

    def request_split(self, experiment_key, run_index, echoed_seed):
        if echoed_seed != self.root_seed:
            return Error(ERR_SEED_MISMATCH, "seed mismatch")
        digest = "0" * 64
        return Split(
            run_index=run_index, train_indices=(0,), test_indices=(1,),
            train_checksum=digest, test_checksum=digest, manifest_digest=digest,
        )

    def submit_metrics(self, request):
        key = (request.experiment_key, request.run_index)
        if key in self.submitted:
            return Error(ERR_DUPLICATE_RUN, "duplicate")
        self.submitted[key] = request
        return MetricsAck(run_index=request.run_index)


def drive(messages, backend=None):
    backend = backend or RecordingBackend()
    state = SessionState()
    responses = []
    for message in messages:
        state, response = session_step(state, message, backend)
        responses.append(response)
    return state, responses, backend


class TestSessionMachine:
    def test_handshake_echoes_version(self):
        state, responses, _ = drive([Hello(protocol_version=PROTOCOL_VERSION)])
        assert responses == [HelloAck(protocol_version=PROTOCOL_VERSION)]
        assert state.phase is Phase.READY

    def test_wrong_version_terminates(self):
        state, responses, _ = drive([Hello(protocol_version=99)])
        assert responses[0].code == ERR_UNSUPPORTED_VERSION
        assert state.phase is Phase.TERMINATED

    def test_pre_hello_requests_rejected(self):
        submit = SubmitMetrics(
            experiment_key="e/buggy", run_index=0,
            accuracy="0.5", precision="0.5", recall="0.5", f1="0.5",
        )
        state, responses, backend = drive([submit, Hello(protocol_version=1)])
        assert responses[0].code == ERR_BAD_STATE
        assert backend.submitted == {}
        assert isinstance(responses[1], HelloAck)  # session can still start

    def test_second_hello_is_out_of_order(self):
        _, responses, _ = drive([Hello(protocol_version=1), Hello(protocol_version=1)])
        assert responses[1].code == ERR_BAD_STATE

    def test_seed_mismatch_terminates_session(self):
        request = RequestSplit(experiment_key="e/buggy", run_index=0, echoed_seed="9999")
        after = RequestSplit(experiment_key="e/buggy", run_index=0, echoed_seed="1111")
        state, responses, _ = drive([Hello(protocol_version=1), request, after])
        assert responses[1].code == ERR_SEED_MISMATCH
        assert state.phase is Phase.TERMINATED
        assert state.seed_mismatch
        assert responses[2] is None  # no transition out of Terminated

    def test_matching_echo_serves_split(self):
        request = RequestSplit(experiment_key="e/buggy", run_index=0, echoed_seed="1111")
        _, responses, _ = drive([Hello(protocol_version=1), request])
        assert isinstance(responses[1], Split)

    def test_duplicate_submit_leaves_store_unchanged(self):
        submit = SubmitMetrics(
            experiment_key="e/buggy", run_index=0,
            accuracy="0.7", precision="0.7", recall="0.7", f1="0.7",
        )
        second = SubmitMetrics(
            experiment_key="e/buggy", run_index=0,
            accuracy="0.9", precision="0.9", recall="0.9", f1="0.9",
        )
        _, responses, backend = drive([Hello(protocol_version=1), submit, second])
        assert responses[1] == MetricsAck(run_index=0)
        assert responses[2].code == ERR_DUPLICATE_RUN
        assert backend.submitted[("e/buggy", 0)].accuracy == "0.7"  # first write kept

    @settings(max_examples=120)
    @given(st.lists(message_strategies, max_size=8))
    def test_fuzzed_sequences_respect_session_safety(self, messages):
        backend = RecordingBackend()
        state = SessionState()
        hello_accepted = False
        for message in messages:
            was_terminated = state.phase is Phase.TERMINATED
            state, response = session_step(state, message, backend)
            if was_terminated:
                assert response is None
                assert state.phase is Phase.TERMINATED
                continue
            if not hello_accepted:
                # nothing but a correct HELLO can elicit a non-error response
                if isinstance(message, Hello) and message.protocol_version == PROTOCOL_VERSION:
                    assert isinstance(response, HelloAck)
                    hello_accepted = True
                else:
                    assert isinstance(response, Error)
