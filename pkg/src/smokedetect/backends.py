"""Inference contracts and the annotation-replaying fixture backend.

The pipeline consumes four contracts: a face detector, a hand detector, a
proposal classifier, and a cigarette detector.  The fixture backend replays
a line-delimited JSON annotation file so every pipeline behavior is testable
without trained models; an adapter for serialized pretrained models lives in
``model_adapter``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Mapping, Protocol, runtime_checkable

from .errors import ParseError, ValidationError
from .geometry import CenterBox, CornerBox
from .imaging import ImageRef, PixelRegion


class ClassLabel(IntEnum):
    """Binary smoker/non-smoker label; the 0/1 encoding makes max-aggregation meaningful."""

    NON_SMOKER = 0
    SMOKER = 1


class ProposalKind(str, Enum):
    FACE = "face"
    HAND = "hand"


# Classifier decision threshold: a score of exactly 0.5 counts as smoker.
# The operating point favors recall over precision.
SMOKER_SCORE_THRESHOLD = 0.5

# Crop tag used when the region under inspection is the whole image.
WHOLE_IMAGE_KEY = "image"


def label_for_score(score: float) -> ClassLabel:
    """Map a smoker-class probability to a label; ties at 0.5 resolve to smoker."""
    return ClassLabel.SMOKER if score >= SMOKER_SCORE_THRESHOLD else ClassLabel.NON_SMOKER


def proposal_key(kind: ProposalKind, index: int) -> str:
    """Annotation key for a proposal, e.g. ``face:0`` or ``hand:2``."""
    return f"{kind.value}:{index}"


def _check_confidence(value: float, context: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{context}: confidence {value} outside [0, 1]")
    return value


@dataclass(frozen=True)
class FaceProposalRaw:
    """A face region straight from the detector, in center format."""

    box: CenterBox
    confidence: float

    def __post_init__(self):
        _check_confidence(self.confidence, "face proposal")


@dataclass(frozen=True)
class HandProposalRaw:
    """A hand region straight from the detector, in corner format."""

    box: CornerBox
    confidence: float

    def __post_init__(self):
        _check_confidence(self.confidence, "hand proposal")


@dataclass(frozen=True)
class DetectionSource:
    """Where a cigarette detection came from: the full image or a positive proposal.

    ``positive_ordinal`` indexes into a result's positive proposals (0..l-1),
    not the full proposal list.
    """

    kind: str  # "full" | "proposal"
    positive_ordinal: int | None = None

    def __post_init__(self):
        if self.kind not in ("full", "proposal"):
            raise ValidationError(f"unknown detection source kind {self.kind!r}")
        if (self.kind == "proposal") != (self.positive_ordinal is not None):
            raise ValidationError("proposal sources need an ordinal; full-image sources must not have one")
        if self.positive_ordinal is not None and self.positive_ordinal < 0:
            raise ValidationError("positive ordinal must be nonnegative")

    @classmethod
    def full_image(cls) -> DetectionSource:
        return cls("full")

    @classmethod
    def proposal(cls, positive_ordinal: int) -> DetectionSource:
        return cls("proposal", positive_ordinal)

    def __str__(self) -> str:
        if self.kind == "full":
            return "full"
        return f"proposal:{self.positive_ordinal}"


FULL_IMAGE = DetectionSource.full_image()


@dataclass(frozen=True)
class Detection:
    """A located cigarette.

    Backends return detections in region-local coordinates with a provisional
    full-image source; the pipeline translates boxes into image coordinates
    and assigns the final source.
    """

    box: CornerBox
    confidence: float
    source: DetectionSource = FULL_IMAGE

    def __post_init__(self):
        _check_confidence(self.confidence, "detection")


@runtime_checkable
class FaceDetector(Protocol):
    name: str
    concurrent_safe: bool

    def detect_faces(self, image: ImageRef) -> list[FaceProposalRaw]: ...


@runtime_checkable
class HandDetector(Protocol):
    name: str
    concurrent_safe: bool

    def detect_hands(self, image: ImageRef) -> list[HandProposalRaw]: ...


@runtime_checkable
class ProposalClassifier(Protocol):
    name: str
    concurrent_safe: bool

    def classify_proposal(self, crop: PixelRegion) -> tuple[ClassLabel, float]: ...


@runtime_checkable
class CigaretteDetector(Protocol):
    name: str
    concurrent_safe: bool

    def detect_cigarettes(self, region: PixelRegion) -> list[Detection]: ...


@dataclass(frozen=True)
class BackendSuite:
    """The four inference backends the pipeline consumes."""

    face_detector: FaceDetector
    hand_detector: HandDetector
    proposal_classifier: ProposalClassifier
    cigarette_detector: CigaretteDetector

    @property
    def concurrent_safe(self) -> bool:
        """True when every backend may be called from multiple threads."""
        return all(
            backend.concurrent_safe
            for backend in (
                self.face_detector,
                self.hand_detector,
                self.proposal_classifier,
                self.cigarette_detector,
            )
        )


@dataclass(frozen=True)
class FixtureAnnotation:
    """Replay data for one image, with keys resolved to confidence-sorted order."""

    image_id: str
    faces: tuple[FaceProposalRaw, ...]
    hands: tuple[HandProposalRaw, ...]
    labels: Mapping[str, ClassLabel]
    detections_full: tuple[Detection, ...]
    detections_per_proposal: Mapping[str, tuple[Detection, ...]]


_EMPTY_ANNOTATION = FixtureAnnotation("", (), (), {}, (), {})


def _parse_center_box(obj: dict, context: str) -> CenterBox:
    try:
        return CenterBox(float(obj["cx"]), float(obj["cy"]), float(obj["w"]), float(obj["h"]))
    except KeyError as exc:
        raise ValidationError(f"{context}: missing box field {exc}") from exc


def _parse_corner_box(obj: dict, context: str) -> CornerBox:
    try:
        return CornerBox(float(obj["x1"]), float(obj["y1"]), float(obj["x2"]), float(obj["y2"]))
    except KeyError as exc:
        raise ValidationError(f"{context}: missing box field {exc}") from exc


def _parse_detection(obj: dict, context: str) -> Detection:
    box = _parse_corner_box(obj, context)
    return Detection(box=box, confidence=_check_confidence(obj.get("conf", 1.0), context))


def _parse_label(value: object, context: str) -> ClassLabel:
    if value in (0, 1):
        return ClassLabel(value)
    raise ValidationError(f"{context}: label must be 0 or 1, got {value!r}")


def _sorted_rekeyed(record: dict, image_id: str) -> FixtureAnnotation:
    context = f"image {image_id!r}"
    faces = [
        FaceProposalRaw(_parse_center_box(obj, f"{context} face[{i}]"),
                        _check_confidence(obj.get("conf", 1.0), f"{context} face[{i}]"))
        for i, obj in enumerate(record.get("faces", []))
    ]
    hands = [
        HandProposalRaw(_parse_corner_box(obj, f"{context} hand[{i}]"),
                        _check_confidence(obj.get("conf", 1.0), f"{context} hand[{i}]"))
        for i, obj in enumerate(record.get("hands", []))
    ]

    # Contracts return proposals sorted by descending confidence; annotation
    # keys ("face:0") refer to file order, so remap them to sorted order.
    face_order = sorted(range(len(faces)), key=lambda i: -faces[i].confidence)
    hand_order = sorted(range(len(hands)), key=lambda i: -hands[i].confidence)
    face_new_index = {old: new for new, old in enumerate(face_order)}
    hand_new_index = {old: new for new, old in enumerate(hand_order)}

    def remap(key: str) -> str:
        if key == WHOLE_IMAGE_KEY:
            return key
        kind, _, index_text = key.partition(":")
        try:
            index = int(index_text)
        except ValueError:
            raise ValidationError(f"{context}: malformed proposal key {key!r}") from None
        if kind == ProposalKind.FACE.value:
            table, count = face_new_index, len(faces)
        elif kind == ProposalKind.HAND.value:
            table, count = hand_new_index, len(hands)
        else:
            raise ValidationError(f"{context}: unknown proposal kind in key {key!r}")
        if not 0 <= index < count:
            raise ValidationError(f"{context}: key {key!r} does not refer to a declared box")
        return f"{kind}:{table[index]}"

    labels = {
        remap(key): _parse_label(value, f"{context} labels[{key!r}]")
        for key, value in record.get("labels", {}).items()
    }
    detections_full = tuple(
        _parse_detection(obj, f"{context} det_full[{i}]")
        for i, obj in enumerate(record.get("det_full", []))
    )
    detections_per_proposal = {
        remap(key): tuple(
            _parse_detection(obj, f"{context} det_prop[{key!r}][{i}]")
            for i, obj in enumerate(entries)
        )
        for key, entries in record.get("det_prop", {}).items()
    }
    if WHOLE_IMAGE_KEY in detections_per_proposal:
        raise ValidationError(f"{context}: whole-image detections belong in det_full")

    return FixtureAnnotation(
        image_id=image_id,
        faces=tuple(faces[i] for i in face_order),
        hands=tuple(hands[i] for i in hand_order),
        labels=labels,
        detections_full=detections_full,
        detections_per_proposal=detections_per_proposal,
    )


@dataclass(frozen=True)
class _FixtureData:
    annotations: Mapping[str, FixtureAnnotation]

    def for_image(self, image_id: str) -> FixtureAnnotation:
        return self.annotations.get(image_id, _EMPTY_ANNOTATION)


@dataclass(frozen=True)
class FixtureFaceDetector:
    data: _FixtureData
    name: str = "fixture:faces"
    concurrent_safe: bool = True

    def detect_faces(self, image: ImageRef) -> list[FaceProposalRaw]:
        return list(self.data.for_image(image.id).faces)


@dataclass(frozen=True)
class FixtureHandDetector:
    data: _FixtureData
    name: str = "fixture:hands"
    concurrent_safe: bool = True

    def detect_hands(self, image: ImageRef) -> list[HandProposalRaw]:
        return list(self.data.for_image(image.id).hands)


@dataclass(frozen=True)
class FixtureProposalClassifier:
    """Replays annotated labels, keyed on the crop's proposal tag.

    Unannotated crops classify as non-smoker with score 0.0; absence means
    nothing smoker-like was marked there.
    """

    data: _FixtureData
    name: str = "fixture:classifier"
    concurrent_safe: bool = True

    def classify_proposal(self, crop: PixelRegion) -> tuple[ClassLabel, float]:
        annotation = self.data.for_image(crop.source)
        label = ClassLabel.NON_SMOKER
        if crop.tag is not None:
            label = annotation.labels.get(crop.tag, ClassLabel.NON_SMOKER)
        score = 1.0 if label is ClassLabel.SMOKER else 0.0
        return label, score


@dataclass(frozen=True)
class FixtureCigaretteDetector:
    """Replays annotated detections: full-image entries for whole-image queries,
    per-proposal entries for crops tagged with that proposal's key."""

    data: _FixtureData
    name: str = "fixture:cigarettes"
    concurrent_safe: bool = True

    def detect_cigarettes(self, region: PixelRegion) -> list[Detection]:
        annotation = self.data.for_image(region.source)
        if region.tag is None or region.tag == WHOLE_IMAGE_KEY:
            return list(annotation.detections_full)
        return list(annotation.detections_per_proposal.get(region.tag, ()))


def parse_fixture_records(path: str | Path) -> dict[str, FixtureAnnotation]:
    """Parse a fixture annotation file: UTF-8, one JSON record per line.

    Unknown keys inside a record are ignored for forward compatibility.
    Raises ParseError for unreadable files or malformed JSON and
    ValidationError for records that violate the schema.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read fixture file: {exc}", path=str(path)) from exc

    annotations: dict[str, FixtureAnnotation] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line_no, path=str(path)) from exc
        if not isinstance(record, dict):
            raise ParseError("record must be a JSON object", line=line_no, path=str(path))
        image_id = record.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            raise ParseError("record needs a nonempty image_id", line=line_no, path=str(path))
        if image_id in annotations:
            raise ValidationError(f"duplicate image_id {image_id!r} at line {line_no}")
        annotations[image_id] = _sorted_rekeyed(record, image_id)
    return annotations


def load_fixture_backend(path: str | Path) -> BackendSuite:
    """Build a deterministic, concurrent-safe suite that replays a fixture file."""
    data = _FixtureData(parse_fixture_records(path))
    return BackendSuite(
        face_detector=FixtureFaceDetector(data),
        hand_detector=FixtureHandDetector(data),
        proposal_classifier=FixtureProposalClassifier(data),
        cigarette_detector=FixtureCigaretteDetector(data),
    )
