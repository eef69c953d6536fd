#!/usr/bin/env python3
"""Regenerate the golden end-to-end fixture under testdata/golden/.

Produces ten small images, the fixture annotation file, the ground-truth
manifest, and the expected pipeline results/report the acceptance suite
compares against byte-for-byte.  The expected values are additionally pinned
by hand-computed assertions in tests/test_acceptance.py, so this script
cannot silently redefine correctness.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from smokedetect import evaluation, imaging, pipeline  # noqa: E402
from smokedetect.backends import load_fixture_backend  # noqa: E402

GOLDEN = REPO / "testdata" / "golden"

# Annotation records; box lists are ordered by descending confidence.
# The "image" label drives the raw (whole-image) strategy.
RECORDS = [
    {
        "image_id": "g00",
        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
        "labels": {"face:0": 0, "image": 1},
    },
    {
        "image_id": "g01",
        "faces": [{"cx": 30, "cy": 20, "w": 12, "h": 10, "conf": 0.8}],
        "labels": {"face:0": 1, "image": 1},
        "det_full": [{"x1": 26, "y1": 18, "x2": 34, "y2": 24, "conf": 0.9}],
    },
    {
        # Fallback case: smoker verdict, empty full-image pass, hit inside the
        # positive hand crop.
        "image_id": "g02",
        "hands": [{"x1": 10, "y1": 10, "x2": 30, "y2": 26, "conf": 0.7}],
        "labels": {"hand:0": 1, "image": 0},
        "det_prop": {"hand:0": [{"x1": 2, "y1": 3, "x2": 8, "y2": 7, "conf": 0.8}]},
    },
    {
        # No proposals at all.
        "image_id": "g03",
        "labels": {"image": 0},
    },
    {
        # Multi-proposal image: two faces plus a hand, one face positive.
        "image_id": "g04",
        "faces": [
            {"cx": 16, "cy": 12, "w": 8, "h": 8, "conf": 0.95},
            {"cx": 40, "cy": 14, "w": 8, "h": 8, "conf": 0.85},
        ],
        "hands": [{"x1": 30, "y1": 30, "x2": 42, "y2": 42, "conf": 0.9}],
        "labels": {"face:0": 0, "face:1": 1, "hand:0": 0, "image": 1},
        "det_full": [{"x1": 38, "y1": 12, "x2": 46, "y2": 20, "conf": 0.7}],
    },
    {
        "image_id": "g05",
        "hands": [{"x1": 5, "y1": 5, "x2": 20, "y2": 20, "conf": 0.6}],
        "labels": {"hand:0": 0, "image": 0},
    },
    {
        # Smoker verdict with nothing to find anywhere: fallback fires and
        # comes back empty.
        "image_id": "g06",
        "faces": [{"cx": 20, "cy": 20, "w": 10, "h": 10, "conf": 0.9}],
        "labels": {"face:0": 1, "image": 0},
    },
    {
        "image_id": "g07",
        "faces": [{"cx": 32, "cy": 16, "w": 8, "h": 8, "conf": 0.7}],
        "labels": {"face:0": 0, "image": 1},
    },
    {
        # Hand box whose adjusted form exits the image and gets clipped.
        "image_id": "g08",
        "hands": [{"x1": 50, "y1": 34, "x2": 63, "y2": 47, "conf": 0.8}],
        "labels": {"hand:0": 1, "image": 1},
        "det_full": [{"x1": 49, "y1": 33, "x2": 59, "y2": 43, "conf": 0.95}],
    },
    {
        # Second face sits below the 0.5 confidence threshold; its smoker
        # label must never be consulted.
        "image_id": "g09",
        "faces": [
            {"cx": 24, "cy": 24, "w": 12, "h": 12, "conf": 0.9},
            {"cx": 48, "cy": 10, "w": 8, "h": 8, "conf": 0.4},
        ],
        "labels": {"face:0": 0, "face:1": 1, "image": 0},
    },
]

# path stem -> ground truth (1 = smoker)
TRUTH = {
    "g00": 0,
    "g01": 1,
    "g02": 1,
    "g03": 0,
    "g04": 1,
    "g05": 0,
    "g06": 0,
    "g07": 1,
    "g08": 1,
    "g09": 0,
}


def make_image_array(index: int) -> np.ndarray:
    arr = np.zeros((48, 64, 3), dtype=np.uint8)
    arr[:, :] = ((37 * index + 20) % 256, (61 * index + 80) % 256, (89 * index + 40) % 256)
    # A diagonal stripe so crops are visually distinguishable.
    for y in range(48):
        arr[y, (y + 3 * index) % 64] = (255, 255, 255)
    return arr


def main() -> None:
    images_dir = GOLDEN / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    for i, record in enumerate(RECORDS):
        image = imaging.from_array(record["image_id"], make_image_array(i))
        imaging.encode_png(image, images_dir / f"{record['image_id']}.png")

    fixture_path = GOLDEN / "fixture.jsonl"
    fixture_path.write_text(
        "".join(json.dumps(r) + "\n" for r in RECORDS), encoding="utf-8"
    )

    manifest_path = GOLDEN / "manifest.csv"
    manifest_path.write_text(
        "path,label\n"
        + "".join(f"images/{stem}.png,{label}\n" for stem, label in TRUTH.items()),
        encoding="utf-8",
    )

    suite = load_fixture_backend(fixture_path)
    entries = evaluation.load_manifest(manifest_path)
    outcome = pipeline.run_batch([e.image_path for e in entries], suite, pipeline.PipelineConfig())
    assert not outcome.errors, outcome.errors

    (GOLDEN / "expected_results.jsonl").write_text(
        pipeline.results_to_jsonl(outcome.results), encoding="utf-8"
    )
    report = evaluation.evaluate_results(outcome.results, entries)
    (GOLDEN / "expected_report.json").write_text(
        json.dumps(evaluation.report_to_record(report)) + "\n", encoding="utf-8"
    )
    print(f"golden fixture written to {GOLDEN}")


if __name__ == "__main__":
    main()
