#!/usr/bin/env python3
"""Regenerate golden_frames.records, the byte-level protocol contract.

Every conforming client implementation must produce these exact frames for
these messages (and parse them back). Run from the repository root:

    python3 fixtures/generate_golden_frames.py
"""

from pathlib import Path

from reprobench.model import EvaluationType, ExperimentSpec
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
)
from reprobench.records import encode_record

SPEC = ExperimentSpec(
    bug_identifier="study-pr31433",
    evaluation_type=EvaluationType.BUGGY,
    model="vgg-compact",
    challenge="cifar-like",
    state=0,
    artifact="rev-a",
    software="torch==1.5.0",
    epochs=30,
    planned_runs=50,
)

GOLDEN_MESSAGES = [
    ("hello", Hello(protocol_version=1)),
    ("hello_ack", HelloAck(protocol_version=1)),
    ("register", Register(experiment=SPEC)),
    (
        "registered",
        Registered(
            root_seed="9531888692967303985",
            split_seed="2930076264105473946",
            client_rng_seed="7787803626099720786",
        ),
    ),
    (
        "request_split",
        RequestSplit(
            experiment_key="study-pr31433/buggy",
            run_index=0,
            echoed_seed="9531888692967303985",
        ),
    ),
    (
        "split",
        Split(
            run_index=0,
            train_indices=(3, 0, 2),
            test_indices=(1,),
            train_checksum="bbf41a881d61ca32f91f304ca637b37394b70b7ea6d8df0cef86a6972956ed0f",
            test_checksum="3113245759ce722f8a808711ee43b752b77b11885c373c6d91749cfed1bc79aa",
            manifest_digest="a6bb133cb1e3638ad7b8a3ff0539668e9e56f9b850ef1b2a810f5422eaa6c323",
        ),
    ),
    (
        "submit_metrics",
        SubmitMetrics(
            experiment_key="study-pr31433/buggy",
            run_index=0,
            accuracy="0.7012",
            precision="0.7103",
            recall="0.6988",
            f1="0.7045",
        ),
    ),
    ("metrics_ack", MetricsAck(run_index=0)),
    ("error", Error(code="SEED_MISMATCH", detail="echoed seed does not match")),
]


def main() -> None:
    out = Path(__file__).parent / "golden_frames.records"
    with out.open("wb") as fh:
        for name, message in GOLDEN_MESSAGES:
            record = {"name": name, "frame_hex": encode_frame(message).hex()}
            fh.write(encode_record(record) + b"\n")
    print(f"wrote {len(GOLDEN_MESSAGES)} frames to {out}")


if __name__ == "__main__":
    main()
