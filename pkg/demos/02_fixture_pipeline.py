#!/usr/bin/env python3
"""End-to-end pipeline run against the repo's golden fixture backend.

Shows the two-stage flow: proposals are extracted and classified, and the
cigarette detector runs only when the image-level verdict is smoker, with a
per-proposal fallback when the full image yields nothing.

Run: python demos/02_fixture_pipeline.py
"""

import json
from pathlib import Path

from smokedetect import imaging
from smokedetect.backends import load_fixture_backend
from smokedetect.pipeline import PipelineConfig, result_to_record, run_pipeline

GOLDEN = Path(__file__).resolve().parent.parent / "testdata" / "golden"

# The fixture backend replays annotations from a JSONL file; no trained
# models are involved, so every run is deterministic.
suite = load_fixture_backend(GOLDEN / "fixture.jsonl")
print("suite is concurrent-safe:", suite.concurrent_safe)
cfg = PipelineConfig()

# g00 carries one face annotated non-smoker: the detector never runs.
calm = imaging.decode(GOLDEN / "images" / "g00.png")
result = run_pipeline(calm, suite, cfg)
print("\ng00 verdict:", int(result.verdict), "| detector calls:", result.counters.detect_calls)

# g01 carries a smoker face and a full-image detection entry.
direct = imaging.decode(GOLDEN / "images" / "g01.png")
result = run_pipeline(direct, suite, cfg)
print("g01 verdict:", int(result.verdict), "| detector calls:", result.counters.detect_calls)
print("g01 detections:", [(str(d.source), (d.box.x1, d.box.y1, d.box.x2, d.box.y2))
                          for d in result.detections])

# g02 is the fallback case: smoker verdict, nothing on the full image, a hit
# inside the positive hand crop.  Note the 1 + l detector calls and the
# detection translated back into image coordinates.
fallback = imaging.decode(GOLDEN / "images" / "g02.png")
result = run_pipeline(fallback, suite, cfg)
print("\ng02 verdict:", int(result.verdict), "| detector calls:", result.counters.detect_calls)
print("g02 full record:")
print(json.dumps(result_to_record(result), indent=2))

# Annotated rendering: proposal boxes (blue faces, green hands), red
# detection boxes, and a verdict banner.
annotated = imaging.render_annotations(fallback, result.proposals, result.detections,
                                       int(result.verdict))
out = Path("g02.annotated.png")
imaging.encode_png(annotated, out)
print("\nannotated image written to", out)
