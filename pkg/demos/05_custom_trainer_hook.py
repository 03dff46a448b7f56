#!/usr/bin/env python3
"""Plugging a real training loop into the client SDK.

Needs both packages installed (`pip install -e . -e client/`). The hook
below "trains" a toy nearest-centroid classifier with numpy, but the shape
is exactly what a real ML runtime would use: the SDK resets every global
RNG before each run, hands the hook the served train/test index order, and
submits whatever metrics the hook measures.
"""

import hashlib
import pathlib
import shutil

import numpy as np

from repro_client import ExperimentSpec, TrainerHook, run_experiment
from reprobench import ChallengeManifest, macro_metrics
from reprobench.records import write_records
from reprobench.server import BenchServer, ServerConfig

ITEMS = 60
CLASSES = 3

# A fixed toy dataset: three overlapping point clouds in the plane.
_rng = np.random.default_rng(2718)
FEATURES = np.concatenate([
    _rng.normal(center, 1.2, size=(ITEMS // CLASSES, 2))
    for center in ([0, 0], [2, 0], [0, 2])
])
LABELS = np.repeat(np.arange(CLASSES), ITEMS // CLASSES)


class CentroidHook(TrainerHook):
    """Nearest-centroid classifier; epochs shrink the centroid jitter."""

    def train(self, client_rng_seed, train_indices, test_indices, epochs):
        train_idx = np.array(train_indices)
        test_idx = np.array(test_indices)
        # the run's reproducible jitter: the SDK already reseeded numpy
        jitter = np.random.normal(0.0, 1.0 / epochs, size=(CLASSES, 2))
        centroids = np.stack([
            FEATURES[train_idx[LABELS[train_idx] == c]].mean(axis=0)
            for c in range(CLASSES)
        ]) + jitter
        distances = np.linalg.norm(
            FEATURES[test_idx][:, None, :] - centroids[None, :, :], axis=2
        )
        predicted = distances.argmin(axis=1)
        confusion = np.zeros((CLASSES, CLASSES), dtype=int)
        for true, pred in zip(LABELS[test_idx], predicted):
            confusion[true, pred] += 1
        scores = macro_metrics(confusion)
        return {
            "accuracy": scores.accuracy,
            "precision": scores.precision,
            "recall": scores.recall,
            "f1": scores.f1,
        }


workdir = pathlib.Path("demo-workdir-hook")
shutil.rmtree(workdir, ignore_errors=True)
workdir.mkdir()

manifest = ChallengeManifest(
    challenge_id="toy-clouds",
    item_count=ITEMS,
    item_digests=tuple(
        hashlib.sha256(FEATURES[i].tobytes()).digest() for i in range(ITEMS)
    ),
    train_fraction=0.75,
)
manifest_path = workdir / "challenges.records"
write_records(manifest_path, [manifest.to_record()])

config = ServerConfig(
    listen_address="127.0.0.1:0",
    seed_journal=str(workdir / "seeds.journal"),
    metrics_journal=str(workdir / "metrics.journal"),
    manifests=(str(manifest_path),),
)

spec = ExperimentSpec(
    bug_identifier="demo-hook",
    evaluation_type="buggy",
    model="nearest-centroid",
    challenge="toy-clouds",
    state=0,
    artifact="rev-a",
    software=f"numpy=={np.__version__}",
    epochs=3,
    planned_runs=8,
)

with BenchServer(config) as server:
    record = run_experiment(server.address, spec, CentroidHook())

print(f"completed {len(record.runs)} runs (aborted: {list(record.aborted_runs)})")
print(f"determinism mechanisms applied per run: {list(record.runs[0].mechanisms)}")
for run in record.runs:
    print(f"  run {run.run_index}: accuracy={run.metrics['accuracy']:.4f} "
          f"f1={run.metrics['f1']:.4f}")
print("re-running this script reproduces these numbers exactly")
