import hashlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for tests.reference imports

from reprobench.model import ChallengeManifest, EvaluationType, ExperimentSpec
from reprobench.records import write_records
from reprobench.server import BenchServer, ServerConfig


def make_manifest(n: int = 10, challenge_id: str = "cifar-like", train_fraction: float = 0.8):
    digests = tuple(hashlib.sha256(f"item-{i}".encode()).digest() for i in range(n))
    return ChallengeManifest(
        challenge_id=challenge_id,
        item_count=n,
        item_digests=digests,
        train_fraction=train_fraction,
    )


def make_spec(
    bug_identifier: str = "study-pr31433",
    evaluation_type: EvaluationType = EvaluationType.BUGGY,
    challenge: str = "cifar-like",
    artifact: str = "rev-a",
    planned_runs: int = 5,
    epochs: int = 30,
    state: int = 0,
    **overrides,
):
    fields = dict(
        bug_identifier=bug_identifier,
        evaluation_type=evaluation_type,
        model="vgg-compact",
        challenge=challenge,
        state=state,
        artifact=artifact,
        software="torch==1.5.0",
        epochs=epochs,
        planned_runs=planned_runs,
    )
    fields.update(overrides)
    return ExperimentSpec(**fields)


def make_pair(bug_identifier: str = "study-pr31433", **overrides):
    buggy = make_spec(bug_identifier, EvaluationType.BUGGY, artifact="rev-a", **overrides)
    corrected = make_spec(bug_identifier, EvaluationType.CORRECTED, artifact="rev-b", **overrides)
    return buggy, corrected


@pytest.fixture
def manifest_file(tmp_path):
    path = tmp_path / "challenge.records"
    write_records(path, [make_manifest().to_record()])
    return path


def make_config(tmp_path, manifest_path, halt_on_mismatch=False, tag=""):
    return ServerConfig(
        listen_address="127.0.0.1:0",
        seed_journal=str(tmp_path / f"seeds{tag}.journal"),
        metrics_journal=str(tmp_path / f"metrics{tag}.journal"),
        manifests=(str(manifest_path),),
        halt_on_mismatch=halt_on_mismatch,
    )


@pytest.fixture
def running_server(tmp_path, manifest_file):
    server = BenchServer(make_config(tmp_path, manifest_file))
    server.start()
    yield server
    server.stop()


FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"
