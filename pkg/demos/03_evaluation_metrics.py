#!/usr/bin/env python3
"""Evaluation tour: manifests, stratified splits, metrics, and gating savings.

Run: python demos/03_evaluation_metrics.py
"""

from pathlib import Path

from smokedetect.backends import load_fixture_backend
from smokedetect.evaluation import (
    ConfusionMatrix,
    compute_metrics,
    display_percentages,
    evaluate_results,
    format_report_table,
    load_manifest,
    split_train_test,
)
from smokedetect.pipeline import PipelineConfig, run_batch

GOLDEN = Path(__file__).resolve().parent.parent / "testdata" / "golden"

# Metrics come straight from confusion counts; smoker is the positive class.
matrix = ConfusionMatrix(tp=197, tn=190, fp=10, fn=3)
metrics = compute_metrics(matrix)
print("confusion counts:", matrix)
print("precision:", metrics.precision)
print("recall:   ", metrics.recall)
print("accuracy: ", metrics.accuracy)
print("rounded for display:", display_percentages(matrix))

# Manifests are CSV (path,label) or class-named folders.  Splits are
# stratified and fully determined by the seed.
entries = load_manifest(GOLDEN / "manifest.csv")
print("\nmanifest entries:", len(entries))
train, test = split_train_test(entries, ratio=0.8, seed=0)
print("train/test sizes:", len(train), "/", len(test))
print("test ids:", sorted(e.image_id for e in test))

# Batch-run the whole manifest against the fixture backend and report.
suite = load_fixture_backend(GOLDEN / "fixture.jsonl")
outcome = run_batch([e.image_path for e in entries], suite, PipelineConfig(), jobs=4)
report = evaluate_results(outcome.results, entries)
print("\n" + format_report_table(report))

# The gating line is the cost story: an always-on detector would run on all
# ten images; conditioning on the smoker verdict skipped five of them.
