from __future__ import annotations

import itertools
import json

import pytest

from smokedetect.backends import (
    BackendSuite,
    ClassLabel,
    ProposalKind,
    load_fixture_backend,
)
from smokedetect.errors import BackendFailure
from smokedetect.geometry import CornerBox
from smokedetect.pipeline import (
    PipelineConfig,
    Strategy,
    aggregate_labels,
    extract_proposals,
    result_to_record,
    results_to_jsonl,
    run_batch,
    run_pipeline,
)

from conftest import make_image, write_fixture


def approx_box(box: CornerBox, expected: tuple[float, float, float, float], tol=1e-9):
    for actual, want in zip((box.x1, box.y1, box.x2, box.y2), expected):
        assert abs(actual - want) < tol


class TestAggregateLabels:
    def test_any_smoker_wins(self):
        labels = [ClassLabel(v) for v in (0, 0, 1, 0)]
        assert aggregate_labels(labels) is ClassLabel.SMOKER

    def test_all_non_smoker(self):
        assert aggregate_labels([ClassLabel.NON_SMOKER] * 2) is ClassLabel.NON_SMOKER

    def test_empty_is_non_smoker(self):
        assert aggregate_labels([]) is ClassLabel.NON_SMOKER

    def test_matches_logical_or_exhaustively(self):
        # Brute-force oracle over every binary list up to length 6.
        for length in range(0, 7):
            for bits in itertools.product((0, 1), repeat=length):
                expected = int(any(bits))
                got = aggregate_labels([ClassLabel(b) for b in bits])
                assert int(got) == expected, bits


class TestExtractProposals:
    def test_face_and_hand_adjustments_hand_computed(self, tmp_path):
        # face (cx=30, cy=20, w=12, h=10): dh = 0.25*12 = 3, dv = 0.20*10 = 2
        #   -> (30, 22, 15, 10) -> corners (22.5, 17, 37.5, 27)
        # hand (10, 10, 30, 26): d = 0.15*max(20,16) = 3 -> (7, 7, 33, 29)
        path = write_fixture(
            tmp_path / "f.jsonl",
            [
                {
                    "image_id": "img",
                    "faces": [{"cx": 30, "cy": 20, "w": 12, "h": 10, "conf": 0.8}],
                    "hands": [{"x1": 10, "y1": 10, "x2": 30, "y2": 26, "conf": 0.7}],
                }
            ],
        )
        suite = load_fixture_backend(path)
        proposals = extract_proposals(make_image("img"), suite, PipelineConfig())

        assert [p.kind for p in proposals] == [ProposalKind.FACE, ProposalKind.HAND]
        face, hand = proposals
        approx_box(face.raw_box, (24, 15, 36, 25))
        approx_box(face.adjusted_box, (22.5, 17, 37.5, 27))
        assert (face.crop.box.x1, face.crop.box.y1) == (22, 17)
        approx_box(hand.raw_box, (10, 10, 30, 26))
        approx_box(hand.adjusted_box, (7, 7, 33, 29))
        assert hand.crop.tag == "hand:0"

    def test_zero_raw_proposals(self, tmp_path):
        path = write_fixture(tmp_path / "empty.jsonl", [{"image_id": "img"}])
        suite = load_fixture_backend(path)
        assert extract_proposals(make_image("img"), suite, PipelineConfig()) == []

    def test_adjusted_face_clipped_at_image_edge(self, tmp_path):
        # face (cx=60, cy=44, w=10, h=10): dh=2.5, dv=2 -> (60, 46, 12.5, 10)
        # corners (53.75, 41, 66.25, 51) -> clipped to (53.75, 41, 64, 48)
        path = write_fixture(
            tmp_path / "edge.jsonl",
            [{"image_id": "img", "faces": [{"cx": 60, "cy": 44, "w": 10, "h": 10, "conf": 0.9}]}],
        )
        suite = load_fixture_backend(path)
        (face,) = extract_proposals(make_image("img"), suite, PipelineConfig())
        approx_box(face.adjusted_box, (53.75, 41, 64, 48))

    def test_proposal_fully_outside_recorded_as_failure(self, tmp_path):
        path = write_fixture(
            tmp_path / "out.jsonl",
            [{"image_id": "img", "hands": [{"x1": 100, "y1": 100, "x2": 120, "y2": 120, "conf": 0.9}]}],
        )
        suite = load_fixture_backend(path)
        failures = []
        proposals = extract_proposals(make_image("img"), suite, PipelineConfig(), failures)
        assert proposals == []
        assert len(failures) == 1
        assert failures[0].stage == "extract"

    def test_faces_before_hands_in_backend_order(self, tmp_path):
        path = write_fixture(
            tmp_path / "order.jsonl",
            [
                {
                    "image_id": "img",
                    "faces": [
                        {"cx": 10, "cy": 10, "w": 4, "h": 4, "conf": 0.9},
                        {"cx": 20, "cy": 10, "w": 4, "h": 4, "conf": 0.8},
                    ],
                    "hands": [{"x1": 30, "y1": 30, "x2": 40, "y2": 40, "conf": 0.95}],
                }
            ],
        )
        suite = load_fixture_backend(path)
        proposals = extract_proposals(make_image("img"), suite, PipelineConfig())
        assert [(p.kind.value, p.index) for p in proposals] == [
            ("face", 0),
            ("face", 1),
            ("hand", 0),
        ]


FIXTURE_TRACE = [
    {
        # Both proposals non-smoker.
        "image_id": "calm",
        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
        "hands": [{"x1": 30, "y1": 30, "x2": 44, "y2": 44, "conf": 0.8}],
        "labels": {"face:0": 0, "hand:0": 0},
        "det_full": [{"x1": 1, "y1": 1, "x2": 5, "y2": 5, "conf": 0.9}],
    },
    {
        # One smoker proposal; full-image detection succeeds.
        "image_id": "direct",
        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
        "labels": {"face:0": 1},
        "det_full": [{"x1": 16, "y1": 12, "x2": 24, "y2": 20, "conf": 0.8}],
    },
    {
        # Smoker verdict, empty full-image pass, per-proposal hit: fallback fires.
        "image_id": "fallback",
        "hands": [{"x1": 10, "y1": 10, "x2": 30, "y2": 26, "conf": 0.7}],
        "labels": {"hand:0": 1},
        "det_prop": {"hand:0": [{"x1": 2, "y1": 3, "x2": 8, "y2": 7, "conf": 0.85}]},
    },
]


@pytest.fixture
def trace_suite(tmp_path):
    return load_fixture_backend(write_fixture(tmp_path / "trace.jsonl", FIXTURE_TRACE))


class TestRunPipeline:
    def test_non_smoker_image_never_calls_detector(self, trace_suite):
        result = run_pipeline(make_image("calm"), trace_suite, PipelineConfig())
        assert result.verdict is ClassLabel.NON_SMOKER
        assert result.detections == []
        assert result.counters.detect_calls == 0
        assert result.positive_indices == []
        assert result.counters.classify_calls == 2
        assert result.counters.face_calls == 1
        assert result.counters.hand_calls == 1

    def test_smoker_with_full_image_detection(self, trace_suite):
        result = run_pipeline(make_image("direct"), trace_suite, PipelineConfig())
        assert result.verdict is ClassLabel.SMOKER
        assert result.counters.detect_calls == 1
        assert len(result.detections) == 1
        det = result.detections[0]
        assert str(det.source) == "full"
        approx_box(det.box, (16, 12, 24, 20))

    def test_fallback_fires_and_translates_coordinates(self, trace_suite):
        result = run_pipeline(make_image("fallback"), trace_suite, PipelineConfig())
        assert result.verdict is ClassLabel.SMOKER
        # adjusted hand box: delta 0.15*20=3 -> (7, 7, 33, 29); crop origin (7, 7)
        # local detection (2, 3, 8, 7) -> image coordinates (9, 10, 15, 14)
        assert result.counters.detect_calls == 1 + len(result.positive_indices)
        assert len(result.detections) == 1
        det = result.detections[0]
        assert str(det.source) == "proposal:0"
        approx_box(det.box, (9, 10, 15, 14))

    def test_fallback_disabled(self, trace_suite):
        cfg = PipelineConfig(detection_fallback=False)
        result = run_pipeline(make_image("fallback"), trace_suite, cfg)
        assert result.verdict is ClassLabel.SMOKER
        assert result.counters.detect_calls == 1
        assert result.detections == []

    def test_empty_proposal_image_flagged(self, tmp_path):
        suite = load_fixture_backend(write_fixture(tmp_path / "e.jsonl", [{"image_id": "none"}]))
        result = run_pipeline(make_image("none"), suite, PipelineConfig())
        assert result.verdict is ClassLabel.NON_SMOKER
        assert result.empty_proposals
        assert result.counters.detect_calls == 0
        assert result.counters.classify_calls == 0

    def test_raw_strategy_single_whole_image_classify(self, tmp_path):
        suite = load_fixture_backend(
            write_fixture(
                tmp_path / "raw.jsonl",
                [
                    {
                        "image_id": "img",
                        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
                        "labels": {"face:0": 0, "image": 1},
                        "det_full": [{"x1": 1, "y1": 2, "x2": 6, "y2": 8, "conf": 0.9}],
                    }
                ],
            )
        )
        roi = run_pipeline(make_image("img"), suite, PipelineConfig())
        raw = run_pipeline(make_image("img"), suite, PipelineConfig(strategy=Strategy.RAW))

        assert roi.verdict is ClassLabel.NON_SMOKER
        assert raw.verdict is ClassLabel.SMOKER
        assert raw.counters.classify_calls == 1
        assert raw.counters.face_calls == 0
        assert raw.counters.hand_calls == 0
        assert raw.proposals == []
        # Raw smoker verdict still gates detection on; l = 0 so one call only.
        assert raw.counters.detect_calls == 1
        assert len(raw.detections) == 1

    def test_positive_indices_are_combined_order(self, tmp_path):
        suite = load_fixture_backend(
            write_fixture(
                tmp_path / "multi.jsonl",
                [
                    {
                        "image_id": "img",
                        "faces": [
                            {"cx": 10, "cy": 10, "w": 4, "h": 4, "conf": 0.9},
                            {"cx": 20, "cy": 10, "w": 4, "h": 4, "conf": 0.8},
                        ],
                        "hands": [{"x1": 30, "y1": 30, "x2": 40, "y2": 40, "conf": 0.9}],
                        "labels": {"face:0": 0, "face:1": 1, "hand:0": 1},
                    }
                ],
            )
        )
        result = run_pipeline(make_image("img"), suite, PipelineConfig())
        assert result.positive_indices == [1, 2]
        assert result.counters.detect_calls == 1 + 2  # fallback visits both positives

    def test_detection_below_threshold_triggers_fallback(self, tmp_path):
        suite = load_fixture_backend(
            write_fixture(
                tmp_path / "weak.jsonl",
                [
                    {
                        "image_id": "img",
                        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
                        "labels": {"face:0": 1},
                        "det_full": [{"x1": 1, "y1": 1, "x2": 5, "y2": 5, "conf": 0.3}],
                    }
                ],
            )
        )
        result = run_pipeline(make_image("img"), suite, PipelineConfig())
        # The only full-image hit is under threshold, so the first pass is empty.
        assert result.counters.detect_calls == 2
        assert result.detections == []


class _FailingFaceDetector:
    name = "failing:faces"
    concurrent_safe = True

    def detect_faces(self, image):
        raise BackendFailure("face model crashed")


class _FailingClassifier:
    name = "failing:classifier"
    concurrent_safe = True

    def classify_proposal(self, crop):
        raise BackendFailure("classifier crashed")


class _FailingDetector:
    name = "failing:cigarettes"
    concurrent_safe = True

    def detect_cigarettes(self, region):
        raise BackendFailure("detector crashed")


class TestBackendFailures:
    def test_face_failure_treated_as_zero_faces(self, tmp_path):
        base = load_fixture_backend(
            write_fixture(
                tmp_path / "h.jsonl",
                [
                    {
                        "image_id": "img",
                        "hands": [{"x1": 10, "y1": 10, "x2": 20, "y2": 20, "conf": 0.9}],
                        "labels": {"hand:0": 0},
                    }
                ],
            )
        )
        suite = BackendSuite(
            face_detector=_FailingFaceDetector(),
            hand_detector=base.hand_detector,
            proposal_classifier=base.proposal_classifier,
            cigarette_detector=base.cigarette_detector,
        )
        result = run_pipeline(make_image("img"), suite, PipelineConfig())
        assert [p.kind for p in result.proposals] == [ProposalKind.HAND]
        assert [f.stage for f in result.failures] == ["face_detector"]

    def test_classifier_failure_fails_closed(self, tmp_path):
        base = load_fixture_backend(
            write_fixture(
                tmp_path / "c.jsonl",
                [
                    {
                        "image_id": "img",
                        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
                        "labels": {"face:0": 1},
                    }
                ],
            )
        )
        suite = BackendSuite(
            face_detector=base.face_detector,
            hand_detector=base.hand_detector,
            proposal_classifier=_FailingClassifier(),
            cigarette_detector=base.cigarette_detector,
        )
        result = run_pipeline(make_image("img"), suite, PipelineConfig())
        assert result.verdict is ClassLabel.NON_SMOKER
        assert result.counters.detect_calls == 0
        assert any(f.stage == "classifier" for f in result.failures)

    def test_detector_failure_treated_as_zero_detections(self, tmp_path):
        base = load_fixture_backend(
            write_fixture(
                tmp_path / "d.jsonl",
                [
                    {
                        "image_id": "img",
                        "faces": [{"cx": 20, "cy": 16, "w": 8, "h": 10, "conf": 0.9}],
                        "labels": {"face:0": 1},
                    }
                ],
            )
        )
        suite = BackendSuite(
            face_detector=base.face_detector,
            hand_detector=base.hand_detector,
            proposal_classifier=base.proposal_classifier,
            cigarette_detector=_FailingDetector(),
        )
        result = run_pipeline(make_image("img"), suite, PipelineConfig())
        assert result.verdict is ClassLabel.SMOKER
        assert result.detections == []
        # Full-image attempt plus one fallback crop, both failing but counted.
        assert result.counters.detect_calls == 2
        assert [f.stage for f in result.failures] == ["cigarette_detector"] * 2


class TestRunBatch:
    def _materialize(self, tmp_path, ids):
        from smokedetect.imaging import encode_png

        paths = []
        for image_id in ids:
            path = tmp_path / f"{image_id}.png"
            encode_png(make_image(image_id), path)
            paths.append(path)
        return paths

    def test_results_in_manifest_order(self, tmp_path, trace_suite):
        paths = self._materialize(tmp_path, ["fallback", "calm", "direct"])
        outcome = run_batch(paths, trace_suite, PipelineConfig())
        assert [r.image_id for r in outcome.results] == ["fallback", "calm", "direct"]
        assert outcome.errors == []

    def test_parallel_output_identical_to_serial(self, tmp_path, trace_suite):
        paths = self._materialize(tmp_path, ["calm", "direct", "fallback"])
        serial = run_batch(paths, trace_suite, PipelineConfig(), jobs=1)
        parallel = run_batch(paths, trace_suite, PipelineConfig(), jobs=4)
        assert results_to_jsonl(serial.results) == results_to_jsonl(parallel.results)

    def test_undecodable_image_recorded_not_fatal(self, tmp_path, trace_suite):
        paths = self._materialize(tmp_path, ["calm", "direct"])
        bad = tmp_path / "broken.png"
        bad.write_bytes(b"not a png")
        outcome = run_batch([paths[0], bad, paths[1]], trace_suite, PipelineConfig())
        assert [r.image_id for r in outcome.results] == ["calm", "direct"]
        assert len(outcome.errors) == 1
        assert "broken.png" in outcome.errors[0].image_path

    def test_empty_batch(self, trace_suite):
        outcome = run_batch([], trace_suite, PipelineConfig())
        assert outcome.results == [] and outcome.errors == []


class TestSerialization:
    def test_record_shape_and_stability(self, trace_suite):
        result = run_pipeline(make_image("fallback"), trace_suite, PipelineConfig())
        record = result_to_record(result)
        assert list(record) == [
            "image_id",
            "strategy",
            "verdict",
            "proposals",
            "positive_indices",
            "detections",
            "counters",
            "empty_proposals",
            "failures",
        ]
        assert record["counters"] == {
            "face_calls": 1,
            "hand_calls": 1,
            "classify_calls": 1,
            "detect_calls": 2,
        }
        assert record["detections"][0]["source"] == "proposal:0"
        round_tripped = json.loads(json.dumps(record))
        assert round_tripped == record
