"""Pipeline orchestration: extract proposals, classify, and gate the detector.

Per image the flow is: detect face and hand regions, enlarge each box so a
cigarette near the lips or fingers stays inside, crop and classify every
proposal, take the maximum label as the image verdict, and only for smoker
verdicts run the cigarette detector (full image first, then each positive
proposal crop if the first attempt found nothing).  Invocation counters
record what the gating saved.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from . import imaging
from .backends import (
    BackendSuite,
    ClassLabel,
    Detection,
    DetectionSource,
    ProposalKind,
    WHOLE_IMAGE_KEY,
    proposal_key,
)
from .errors import BackendFailure, DecodeError, EmptyIntersection, ValidationError
from .geometry import (
    AdjustmentDeltas,
    CornerBox,
    DEFAULT_FACE_DELTAS,
    DEFAULT_HAND_DELTAS,
    DeltaRule,
    adjust_face_box,
    adjust_hand_box,
    center_to_corner,
    clip_to_extent,
    face_deltas_for,
    hand_deltas_for,
)
from .imaging import ImageRef, PixelRegion


class Strategy(str, Enum):
    """Processing strategy: region-of-interest pipeline or whole-image baseline."""

    ROI = "roi"
    RAW = "raw"


def _check_threshold(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class PipelineConfig:
    face_deltas: DeltaRule | AdjustmentDeltas = DEFAULT_FACE_DELTAS
    hand_deltas: DeltaRule | AdjustmentDeltas = DEFAULT_HAND_DELTAS
    face_confidence: float = 0.5
    hand_confidence: float = 0.5
    detection_confidence: float = 0.5
    strategy: Strategy = Strategy.ROI
    detection_fallback: bool = True

    def __post_init__(self):
        _check_threshold("face_confidence", self.face_confidence)
        _check_threshold("hand_confidence", self.hand_confidence)
        _check_threshold("detection_confidence", self.detection_confidence)


@dataclass
class Proposal:
    """A typed region proposal with its adjusted box and cropped pixels."""

    kind: ProposalKind
    index: int  # ordinal within its kind
    raw_box: CornerBox  # detector output, corner-converted, before adjustment
    adjusted_box: CornerBox  # after enlargement and clipping
    crop: PixelRegion
    label: ClassLabel | None = None
    score: float | None = None


@dataclass
class Counters:
    face_calls: int = 0
    hand_calls: int = 0
    classify_calls: int = 0
    detect_calls: int = 0


@dataclass(frozen=True)
class FailureRecord:
    """A recorded per-image degradation; failures never abort a batch."""

    stage: str
    detail: str


@dataclass
class PipelineResult:
    image_id: str
    strategy: Strategy
    verdict: ClassLabel
    proposals: list[Proposal]
    positive_indices: list[int]  # indices into proposals, in order
    detections: list[Detection]  # image coordinates
    counters: Counters
    failures: list[FailureRecord]
    empty_proposals: bool  # ROI strategy found no usable proposal


def aggregate_labels(labels: Iterable[ClassLabel]) -> ClassLabel:
    """Image verdict: the maximum of the 0/1 proposal labels (logical OR).

    An empty list is non-smoker; with no proposal evidence the detector
    stays gated off.
    """
    return ClassLabel(max((int(label) for label in labels), default=0))


def extract_proposals(
    image: ImageRef,
    suite: BackendSuite,
    cfg: PipelineConfig,
    failures: list[FailureRecord] | None = None,
) -> list[Proposal]:
    """Detect face and hand regions and build adjusted, cropped proposals.

    Proposals come out faces first then hands, each group in backend order
    (descending confidence).  Raw proposals below the configured confidence
    thresholds are excluded.  A proposal whose adjusted box leaves the image
    entirely is dropped and recorded in ``failures``.
    """
    if failures is None:
        failures = []

    try:
        raw_faces = suite.face_detector.detect_faces(image)
    except BackendFailure as exc:
        failures.append(FailureRecord("face_detector", str(exc)))
        raw_faces = []
    try:
        raw_hands = suite.hand_detector.detect_hands(image)
    except BackendFailure as exc:
        failures.append(FailureRecord("hand_detector", str(exc)))
        raw_hands = []

    proposals: list[Proposal] = []

    face_index = 0
    for raw in raw_faces:
        if raw.confidence < cfg.face_confidence:
            continue
        index = face_index
        face_index += 1
        deltas = face_deltas_for(raw.box, cfg.face_deltas)
        adjusted = center_to_corner(adjust_face_box(raw.box, deltas))
        _append_proposal(image, ProposalKind.FACE, index, center_to_corner(raw.box), adjusted, proposals, failures)

    hand_index = 0
    for raw in raw_hands:
        if raw.confidence < cfg.hand_confidence:
            continue
        index = hand_index
        hand_index += 1
        deltas = hand_deltas_for(raw.box, cfg.hand_deltas)
        adjusted = adjust_hand_box(raw.box, deltas)
        _append_proposal(image, ProposalKind.HAND, index, raw.box, adjusted, proposals, failures)

    return proposals


def _append_proposal(
    image: ImageRef,
    kind: ProposalKind,
    index: int,
    raw_box: CornerBox,
    adjusted: CornerBox,
    proposals: list[Proposal],
    failures: list[FailureRecord],
) -> None:
    key = proposal_key(kind, index)
    try:
        clipped = clip_to_extent(adjusted, image.extent)
        region = imaging.crop(image, clipped, tag=key)
    except EmptyIntersection as exc:
        failures.append(FailureRecord("extract", f"{key}: {exc}"))
        return
    proposals.append(
        Proposal(kind=kind, index=index, raw_box=raw_box, adjusted_box=clipped, crop=region)
    )


def _full_image_box(image: ImageRef) -> CornerBox:
    return CornerBox(0.0, 0.0, float(image.extent.width), float(image.extent.height))


def _run_detector(
    image: ImageRef,
    region: PixelRegion,
    source: DetectionSource,
    suite: BackendSuite,
    cfg: PipelineConfig,
    failures: list[FailureRecord],
) -> list[Detection]:
    """Query the cigarette detector on one region and translate hits to image coordinates."""
    try:
        found = suite.cigarette_detector.detect_cigarettes(region)
    except BackendFailure as exc:
        failures.append(FailureRecord("cigarette_detector", str(exc)))
        return []

    origin_x, origin_y = region.box.x1, region.box.y1
    translated: list[Detection] = []
    for det in found:
        if det.confidence < cfg.detection_confidence:
            continue
        box = CornerBox(
            det.box.x1 + origin_x,
            det.box.y1 + origin_y,
            det.box.x2 + origin_x,
            det.box.y2 + origin_y,
        )
        try:
            box = clip_to_extent(box, image.extent)
        except EmptyIntersection as exc:
            failures.append(FailureRecord("cigarette_detector", f"detection outside image: {exc}"))
            continue
        translated.append(replace(det, box=box, source=source))
    return translated


def run_pipeline(image: ImageRef, suite: BackendSuite, cfg: PipelineConfig | None = None) -> PipelineResult:
    """Run the full per-image flow and return the verdict, detections, and counters."""
    if cfg is None:
        cfg = PipelineConfig()
    counters = Counters()
    failures: list[FailureRecord] = []

    if cfg.strategy is Strategy.RAW:
        proposals: list[Proposal] = []
        positive_indices: list[int] = []
        region = imaging.crop(image, _full_image_box(image), tag=WHOLE_IMAGE_KEY)
        counters.classify_calls += 1
        try:
            label, _score = suite.proposal_classifier.classify_proposal(region)
        except BackendFailure as exc:
            failures.append(FailureRecord("classifier", str(exc)))
            label = ClassLabel.NON_SMOKER
        verdict = ClassLabel(label)
        empty_proposals = False
    else:
        counters.face_calls += 1
        counters.hand_calls += 1
        proposals = extract_proposals(image, suite, cfg, failures)
        for proposal in proposals:
            counters.classify_calls += 1
            try:
                label, score = suite.proposal_classifier.classify_proposal(proposal.crop)
            except BackendFailure as exc:
                # Fail closed: an unclassifiable proposal must not trigger detection.
                failures.append(FailureRecord("classifier", f"{proposal.crop.tag}: {exc}"))
                label, score = ClassLabel.NON_SMOKER, 0.0
            proposal.label = ClassLabel(label)
            proposal.score = float(score)
        verdict = aggregate_labels(p.label for p in proposals)
        positive_indices = [
            i for i, p in enumerate(proposals) if p.label is ClassLabel.SMOKER
        ]
        empty_proposals = not proposals

    detections: list[Detection] = []
    if verdict is ClassLabel.SMOKER:
        full_region = imaging.crop(image, _full_image_box(image), tag=WHOLE_IMAGE_KEY)
        counters.detect_calls += 1
        detections = _run_detector(
            image, full_region, DetectionSource.full_image(), suite, cfg, failures
        )
        if not detections and cfg.detection_fallback:
            # First attempt found nothing; revisit each positive proposal crop.
            for ordinal, proposal_index in enumerate(positive_indices):
                crop_region = proposals[proposal_index].crop
                counters.detect_calls += 1
                detections.extend(
                    _run_detector(
                        image,
                        crop_region,
                        DetectionSource.proposal(ordinal),
                        suite,
                        cfg,
                        failures,
                    )
                )

    return PipelineResult(
        image_id=image.id,
        strategy=cfg.strategy,
        verdict=verdict,
        proposals=proposals,
        positive_indices=positive_indices,
        detections=detections,
        counters=counters,
        failures=failures,
        empty_proposals=empty_proposals,
    )


@dataclass(frozen=True)
class BatchError:
    """A per-image error that did not stop the batch."""

    image_path: str
    detail: str


@dataclass
class BatchOutcome:
    results: list[PipelineResult]  # manifest order, failed images omitted
    errors: list[BatchError]


def run_batch(
    image_paths: Sequence[str | Path],
    suite: BackendSuite,
    cfg: PipelineConfig | None = None,
    jobs: int = 1,
) -> BatchOutcome:
    """Run the pipeline over many images; output order matches input order.

    Images are processed concurrently when ``jobs`` > 1 and every backend in
    the suite is concurrent-safe; otherwise one at a time.  Per-image decode
    errors are recorded and the batch continues.
    """
    if cfg is None:
        cfg = PipelineConfig()

    def process(path: str | Path) -> PipelineResult | BatchError:
        try:
            image = imaging.decode(path)
        except DecodeError as exc:
            return BatchError(image_path=str(path), detail=str(exc))
        return run_pipeline(image, suite, cfg)

    if jobs > 1 and suite.concurrent_safe and len(image_paths) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(process, image_paths))
    else:
        outcomes = [process(path) for path in image_paths]

    results = [o for o in outcomes if isinstance(o, PipelineResult)]
    errors = [o for o in outcomes if isinstance(o, BatchError)]
    return BatchOutcome(results=results, errors=errors)


def _box_values(box: CornerBox) -> list[float]:
    return [box.x1, box.y1, box.x2, box.y2]


def result_to_record(result: PipelineResult) -> dict:
    """Serialize a result to a JSON-ready dict with stable key order."""
    return {
        "image_id": result.image_id,
        "strategy": result.strategy.value,
        "verdict": int(result.verdict),
        "proposals": [
            {
                "kind": p.kind.value,
                "index": p.index,
                "raw_box": _box_values(p.raw_box),
                "adjusted_box": _box_values(p.adjusted_box),
                "crop_box": [int(v) for v in _box_values(p.crop.box)],
                "label": None if p.label is None else int(p.label),
                "score": p.score,
            }
            for p in result.proposals
        ],
        "positive_indices": list(result.positive_indices),
        "detections": [
            {
                "box": _box_values(d.box),
                "confidence": d.confidence,
                "source": str(d.source),
            }
            for d in result.detections
        ],
        "counters": {
            "face_calls": result.counters.face_calls,
            "hand_calls": result.counters.hand_calls,
            "classify_calls": result.counters.classify_calls,
            "detect_calls": result.counters.detect_calls,
        },
        "empty_proposals": result.empty_proposals,
        "failures": [{"stage": f.stage, "detail": f.detail} for f in result.failures],
    }


def result_to_json(result: PipelineResult) -> str:
    return json.dumps(result_to_record(result))


def results_to_jsonl(results: Iterable[PipelineResult]) -> str:
    return "".join(result_to_json(r) + "\n" for r in results)
