import socket
import threading

import pytest

from conftest import make_config, make_pair, make_spec
from reprobench.errors import IntegrityError, ServerErrorReply
from reprobench.protocol import (
    Error,
    Hello,
    HelloAck,
    MetricsAck,
    Register,
    Registered,
    RequestSplit,
    Split,
    SubmitMetrics,
    encode_frame,
    read_frame,
    write_frame,
)
from reprobench.server import (
    BenchServer,
    TrainerProfile,
    load_results,
    synthetic_client_run,
)


class RawClient:
    """Thin frame-level client for scripting exact message sequences."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=10)
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")

    def send(self, message):
        write_frame(self.wfile, message)

    def recv(self):
        return read_frame(self.rfile)

    def call(self, message):
        self.send(message)
        return self.recv()

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def register(client, spec):
    assert isinstance(client.call(Hello(protocol_version=1)), HelloAck)
    reply = client.call(Register(experiment=spec))
    assert isinstance(reply, Registered), reply
    return reply


class TestServing:
    def test_reregistration_returns_identical_seeds(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as c1:
            first = register(c1, spec)
        with RawClient(running_server.address) as c2:
            second = register(c2, spec)
        assert first == second

    def test_split_fixed_across_runs(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            reply = register(client, spec)
            split0 = client.call(RequestSplit(spec.experiment_key, 0, reply.root_seed))
            split1 = client.call(RequestSplit(spec.experiment_key, 1, reply.root_seed))
        assert isinstance(split0, Split) and isinstance(split1, Split)
        assert split0.train_indices == split1.train_indices
        assert split0.test_indices == split1.test_indices
        assert split0.train_checksum == split1.train_checksum
        assert split0.run_index == 0 and split1.run_index == 1

    def test_resume_on_new_connection_without_register(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            reply = register(client, spec)
        with RawClient(running_server.address) as client:
            assert isinstance(client.call(Hello(protocol_version=1)), HelloAck)
            split = client.call(RequestSplit(spec.experiment_key, 0, reply.root_seed))
            assert isinstance(split, Split)

    def test_unknown_experiment_and_challenge(self, running_server):
        with RawClient(running_server.address) as client:
            assert isinstance(client.call(Hello(protocol_version=1)), HelloAck)
            reply = client.call(RequestSplit("ghost/buggy", 0, "1"))
            assert isinstance(reply, Error) and reply.code == "UNKNOWN_EXPERIMENT"
            reply = client.call(Register(experiment=make_spec(challenge="nope")))
            assert isinstance(reply, Error) and reply.code == "UNKNOWN_CHALLENGE"

    def test_conflicting_reregistration_refused(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            register(client, spec)
            conflicting = make_spec(epochs=31)
            reply = client.call(Register(experiment=conflicting))
            assert isinstance(reply, Error) and reply.code == "SPEC_CONFLICT"

    def test_out_of_range_metric_refused_and_not_stored(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            register(client, spec)
            reply = client.call(SubmitMetrics(spec.experiment_key, 0, "1.5", "0.5", "0.5", "0.5"))
            assert isinstance(reply, Error) and reply.code == "INVALID_METRIC"
            reply = client.call(SubmitMetrics(spec.experiment_key, 0, "nan", "0.5", "0.5", "0.5"))
            assert isinstance(reply, Error) and reply.code == "INVALID_METRIC"
        assert running_server.export_results(spec.experiment_key).completed_runs == 0

    def test_export_of_unknown_key_raises(self, running_server):
        from reprobench.errors import UnknownExperiment

        with pytest.raises(UnknownExperiment):
            running_server.export_results("ghost/buggy")

    def test_duplicate_run_refused(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            register(client, spec)
            ok = client.call(SubmitMetrics(spec.experiment_key, 0, "0.7", "0.7", "0.7", "0.7"))
            assert isinstance(ok, MetricsAck)
            dup = client.call(SubmitMetrics(spec.experiment_key, 0, "0.8", "0.8", "0.8", "0.8"))
            assert isinstance(dup, Error) and dup.code == "DUPLICATE_RUN"
        results = running_server.export_results(spec.experiment_key)
        assert results.completed_runs == 1
        assert results.runs[0].accuracy == 0.7


class TestDeterminismAcrossRestarts:
    def test_seeds_and_splits_survive_restart(self, tmp_path, manifest_file):
        spec = make_spec()
        config = make_config(tmp_path, manifest_file)
        observed = []
        for _ in range(3):
            with BenchServer(config) as server:
                with RawClient(server.address) as client:
                    reply = register(client, spec)
                    client.send(RequestSplit(spec.experiment_key, 0, reply.root_seed))
                    split_bytes = encode_frame(client.recv())
                    observed.append((reply, split_bytes))
        assert all(item == observed[0] for item in observed)

    def test_metrics_survive_restart(self, tmp_path, manifest_file):
        spec = make_spec(planned_runs=50)
        config = make_config(tmp_path, manifest_file)
        with BenchServer(config) as server:
            with RawClient(server.address) as client:
                register(client, spec)
                for i in range(3):
                    v = repr(0.7 + i * 0.001)
                    assert isinstance(
                        client.call(SubmitMetrics(spec.experiment_key, i, v, v, v, v)),
                        MetricsAck,
                    )
        with BenchServer(config) as server:
            results = server.export_results(spec.experiment_key)
            assert results.completed_runs == 3
            assert [r.run_index for r in results.runs] == [0, 1, 2]
            assert results.shortfall == 47  # short of the 50-run plan
        # independent check: 1 experiment line + 3 run lines on disk
        with open(config.metrics_journal, "rb") as fh:
            assert sum(1 for _ in fh) == 4
        # journal replay from file agrees with the live export
        assert load_results(config.metrics_journal)[spec.experiment_key] == results


class TestSeedMismatch:
    def test_mismatch_terminates_session(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            reply = register(client, spec)
            bad_seed = str((int(reply.root_seed) + 1) % 2**64)
            answer = client.call(RequestSplit(spec.experiment_key, 0, bad_seed))
            assert isinstance(answer, Error) and answer.code == "SEED_MISMATCH"
            # session is dead: no further responses on this connection
            client.send(RequestSplit(spec.experiment_key, 0, reply.root_seed))
            assert client.recv() is None

    def test_halt_on_mismatch_refuses_new_sessions(self, tmp_path, manifest_file):
        spec = make_spec()
        config = make_config(tmp_path, manifest_file, halt_on_mismatch=True)
        with BenchServer(config) as server:
            with RawClient(server.address) as client:
                reply = register(client, spec)
                bad_seed = str((int(reply.root_seed) + 1) % 2**64)
                answer = client.call(RequestSplit(spec.experiment_key, 0, bad_seed))
                assert answer.code == "SEED_MISMATCH"
            with RawClient(server.address) as client:
                response = client.call(Hello(protocol_version=1))
                assert isinstance(response, Error) and response.code == "HALTED"

    def test_without_halt_flag_new_sessions_continue(self, running_server):
        spec = make_spec()
        with RawClient(running_server.address) as client:
            reply = register(client, spec)
            bad_seed = str((int(reply.root_seed) + 1) % 2**64)
            client.call(RequestSplit(spec.experiment_key, 0, bad_seed))
        with RawClient(running_server.address) as client:
            assert isinstance(client.call(Hello(protocol_version=1)), HelloAck)


class TestSyntheticClient:
    def test_zero_spread_submits_exact_means(self, running_server):
        spec = make_spec(planned_runs=4)
        profile = TrainerProfile(mean=0.7, spread=0.0)
        results = synthetic_client_run(running_server.address, spec, profile)
        assert results.completed_runs == 4
        for run in results.runs:
            assert run.accuracy == run.precision == run.recall == run.f1 == 0.7
        exported = running_server.export_results(spec.experiment_key)
        assert exported.runs == results.runs

    def test_deterministic_across_fresh_servers(self, tmp_path, manifest_file):
        spec = make_spec(planned_runs=5)
        profile = TrainerProfile(mean=0.7, spread=0.01)
        collected = []
        for tag in ("a", "b"):
            (tmp_path / tag).mkdir(exist_ok=True)
            with BenchServer(make_config(tmp_path / tag, manifest_file, tag=tag)) as server:
                collected.append(synthetic_client_run(server.address, spec, profile))
        assert collected[0] == collected[1]

    def test_spread_produces_run_to_run_variation(self, running_server):
        spec = make_spec("study-varied", planned_runs=10)
        profile = TrainerProfile(mean=0.7, spread=0.003)
        results = synthetic_client_run(running_server.address, spec, profile)
        accuracies = results.metric_values("accuracy")
        assert len(set(accuracies)) > 1

    def test_per_metric_means(self, running_server):
        spec = make_spec("study-permetric", planned_runs=2)
        profile = TrainerProfile(mean=0.5, spread=0.0, means={"f1": 0.9})
        results = synthetic_client_run(running_server.address, spec, profile)
        assert results.runs[0].f1 == 0.9
        assert results.runs[0].accuracy == 0.5

    def test_server_error_aborts(self, running_server):
        spec = make_spec(challenge="missing-challenge")
        with pytest.raises(ServerErrorReply) as exc_info:
            synthetic_client_run(running_server.address, spec, TrainerProfile())
        assert exc_info.value.code == "UNKNOWN_CHALLENGE"


class TamperProxy:
    """Relay that swaps two train indices inside every SPLIT response."""

    def __init__(self, upstream):
        self.upstream = upstream
        self.listener = socket.socket()
        self.listener.bind(("127.0.0.1", 0))
        self.listener.listen(1)
        self.address = self.listener.getsockname()
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def _run(self):
        client, _ = self.listener.accept()
        server = socket.create_connection(self.upstream)
        c_r, c_w = client.makefile("rb"), client.makefile("wb")
        s_r, s_w = server.makefile("rb"), server.makefile("wb")
        try:
            while True:
                request = read_frame(c_r)
                if request is None:
                    return
                write_frame(s_w, request)
                response = read_frame(s_r)
                if response is None:
                    return
                if isinstance(response, Split) and len(response.train_indices) >= 2:
                    tampered = list(response.train_indices)
                    tampered[0], tampered[1] = tampered[1], tampered[0]
                    response = Split(
                        run_index=response.run_index,
                        train_indices=tuple(tampered),
                        test_indices=response.test_indices,
                        train_checksum=response.train_checksum,
                        test_checksum=response.test_checksum,
                        manifest_digest=response.manifest_digest,
                    )
                write_frame(c_w, response)
        except (OSError, ValueError):
            pass
        finally:
            client.close()
            server.close()

    def close(self):
        self.listener.close()


def test_in_transit_tampering_detected(running_server):
    proxy = TamperProxy(running_server.address)
    try:
        spec = make_spec("study-tampered", planned_runs=1)
        with pytest.raises(IntegrityError):
            synthetic_client_run(proxy.address, spec, TrainerProfile())
    finally:
        proxy.close()


def test_concurrent_sessions_on_distinct_experiments(running_server):
    """Many sessions at once; the serialized writer must keep both journals
    coherent."""
    errors = []

    def one_client(index):
        try:
            spec = make_spec(f"study-concurrent-{index}", planned_runs=4)
            synthetic_client_run(running_server.address, spec, TrainerProfile(0.7, 0.002))
        except Exception as exc:  # surfaced after join
            errors.append(exc)

    threads = [threading.Thread(target=one_client, args=(i,)) for i in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join(timeout=30)
    assert errors == []
    for i in range(8):
        exported = running_server.export_results(f"study-concurrent-{i}/buggy")
        assert exported.completed_runs == 4


def test_buggy_and_corrected_pair_completes(running_server):
    buggy_spec, corrected_spec = make_pair(planned_runs=6)
    buggy = synthetic_client_run(
        running_server.address, buggy_spec, TrainerProfile(mean=0.70, spread=0.003)
    )
    corrected = synthetic_client_run(
        running_server.address, corrected_spec, TrainerProfile(mean=0.72, spread=0.003)
    )
    assert buggy.completed_runs == corrected.completed_runs == 6
    # the two sides draw from differently-derived seeds
    assert buggy.metric_values("accuracy") != corrected.metric_values("accuracy")
