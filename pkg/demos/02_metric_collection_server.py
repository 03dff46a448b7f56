#!/usr/bin/env python3
"""A complete buggy-vs-corrected campaign against a live server.

Starts the benchmarking server on a loopback port, runs the synthetic
deterministic client for both versions of one "bug" (50 runs x 30 epochs,
the usual campaign scale), and compares the two metric distributions with
the rank test. The corrected profile is nudged 2 points up, so every metric
should come out significant.

Run from the repository root; writes its journals under ./demo-workdir/.
"""

import hashlib
import pathlib
import shutil

from reprobench import (
    ChallengeManifest,
    EvaluationType,
    ExperimentSpec,
    TrainerProfile,
    compare_experiments,
    descriptive,
    synthetic_client_run,
)
from reprobench.records import write_records
from reprobench.server import BenchServer, ServerConfig

workdir = pathlib.Path("demo-workdir")
shutil.rmtree(workdir, ignore_errors=True)
workdir.mkdir()

manifest = ChallengeManifest(
    challenge_id="demo-cifar",
    item_count=50,
    item_digests=tuple(hashlib.sha256(f"img-{i}".encode()).digest() for i in range(50)),
    train_fraction=0.8,
)
manifest_path = workdir / "challenges.records"
write_records(manifest_path, [manifest.to_record()])

config = ServerConfig(
    listen_address="127.0.0.1:0",
    seed_journal=str(workdir / "seeds.journal"),
    metrics_journal=str(workdir / "metrics.journal"),
    manifests=(str(manifest_path),),
)


def spec_for(evaluation_type, artifact):
    return ExperimentSpec(
        bug_identifier="demo-pr31433",
        evaluation_type=evaluation_type,
        model="vgg-compact",
        challenge="demo-cifar",
        state=0,
        artifact=artifact,
        software="torch==1.5.0",
        epochs=30,
        planned_runs=50,
    )


with BenchServer(config) as server:
    print(f"server listening on {server.address[0]}:{server.address[1]}")

    buggy = synthetic_client_run(
        server.address, spec_for(EvaluationType.BUGGY, "rev-a"),
        TrainerProfile(mean=0.70, spread=0.003),
    )
    corrected = synthetic_client_run(
        server.address, spec_for(EvaluationType.CORRECTED, "rev-b"),
        TrainerProfile(mean=0.72, spread=0.003),
    )
    print(f"collected {buggy.completed_runs} buggy and "
          f"{corrected.completed_runs} corrected runs")

print()
print("== per-version descriptive statistics ==")
for label, results in (("buggy", buggy), ("corrected", corrected)):
    summary = descriptive(results)
    accuracy = summary["accuracy"]
    print(f"  {label:10s} accuracy: mean={accuracy.mean:.4f} std={accuracy.std:.4f} "
          f"range=[{accuracy.minimum:.4f}, {accuracy.maximum:.4f}]")

print()
print("== rank-test comparison (alpha = 0.05) ==")
comparison = compare_experiments(buggy, corrected, alpha=0.05)
for name, test in comparison.tests.items():
    flag = "SIGNIFICANT" if name in comparison.significant_metrics else "not significant"
    print(f"  {name:>9}: u={test.u_statistic:6.1f} p={test.p_value:.5f} ({test.method.value}) {flag}")
print(f"  dagger mark: {comparison.dagger} (both sides completed their plan)")

print()
print("journals left in ./demo-workdir/ - restart the server on them and "
      "every seed and split comes back identical")
