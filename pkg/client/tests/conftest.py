import hashlib
import json
import re
import subprocess
import sys
import time
import zlib
from pathlib import Path

import pytest

FIXTURES_DIR = Path(__file__).parents[2] / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


def canonical_line(record: dict) -> bytes:
    return json.dumps(record, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def write_manifest(path: Path, challenge_id="cifar-like", n=10, train_fraction=0.8):
    digests = [hashlib.sha256(f"item-{i}".encode()).hexdigest() for i in range(n)]
    record = {
        "challenge_id": challenge_id,
        "item_count": n,
        "item_digests": digests,
        "train_fraction": train_fraction,
    }
    path.write_bytes(canonical_line(record) + b"\n")


class ServerProcess:
    """A benchmarking server launched through its public CLI."""

    def __init__(self, workdir: Path, halt_on_mismatch: bool = False):
        workdir.mkdir(parents=True, exist_ok=True)
        self.workdir = workdir
        self.metrics_journal = workdir / "metrics.journal"
        manifest_path = workdir / "challenge.records"
        write_manifest(manifest_path)
        config = {
            "listen_address": "127.0.0.1:0",
            "seed_journal": str(workdir / "seeds.journal"),
            "metrics_journal": str(self.metrics_journal),
            "manifests": [str(manifest_path)],
            "halt_on_mismatch": halt_on_mismatch,
            "master_key": "",
        }
        config_path = workdir / "server.config"
        config_path.write_bytes(canonical_line(config) + b"\n")
        self.process = subprocess.Popen(
            ["repro-bench", "server", "--config", str(config_path)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        self.address = self._await_listening()

    def _await_listening(self, timeout=20.0):
        deadline = time.monotonic() + timeout
        pattern = re.compile(r"serving on ([\d.]+):(\d+)")
        while time.monotonic() < deadline:
            line = self.process.stderr.readline()
            if not line:
                if self.process.poll() is not None:
                    raise RuntimeError(
                        f"server exited early: {self.process.stderr.read()}"
                    )
                continue
            match = pattern.search(line)
            if match:
                return (match.group(1), int(match.group(2)))
        raise RuntimeError("server never reported its listen address")

    def export_results(self) -> dict:
        """Parse the metrics journal into {experiment_key: (spec, runs)}."""
        results = {}
        for raw in self.metrics_journal.read_bytes().splitlines():
            payload, crc = raw.rsplit(b"|", 1)
            assert crc.decode() == format(zlib.crc32(payload), "08x"), "corrupt journal line"
            record = json.loads(payload.decode("utf-8"))
            if record["kind"] == "experiment":
                spec = record["spec"]
                key = f"{spec['bug_identifier']}/{spec['evaluation_type']}"
                results.setdefault(key, {"spec": spec, "runs": []})
            elif record["kind"] == "run":
                results[record["experiment_key"]]["runs"].append(record["run"])
        for entry in results.values():
            entry["runs"].sort(key=lambda run: run["run_index"])
        return results

    def stop(self):
        self.process.terminate()
        try:
            self.process.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.process.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.stop()


@pytest.fixture
def server(tmp_path):
    with ServerProcess(tmp_path / "server") as process:
        yield process


def make_spec(bug_identifier="sdk-study", evaluation_type="buggy", planned_runs=5, **overrides):
    from repro_client import ExperimentSpec

    fields = dict(
        bug_identifier=bug_identifier,
        evaluation_type=evaluation_type,
        model="vgg-compact",
        challenge="cifar-like",
        state=0,
        artifact="rev-a",
        software="torch==1.5.0",
        epochs=30,
        planned_runs=planned_runs,
    )
    fields.update(overrides)
    return ExperimentSpec(**fields)
