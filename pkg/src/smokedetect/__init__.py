"""Two-stage smoking-behavior pipeline.

Region proposals (face and hand) are extracted and enlarged, each crop is
classified, the image verdict is the maximum proposal label, and a cigarette
detector runs only on smoker-classified images.  All neural inference sits
behind pluggable backend contracts; the fixture backend replays annotation
files so the pipeline is fully testable without trained models.
"""

from .backends import (
    BackendSuite,
    ClassLabel,
    Detection,
    DetectionSource,
    FaceProposalRaw,
    HandProposalRaw,
    ProposalKind,
    label_for_score,
    load_fixture_backend,
    proposal_key,
)
from .errors import (
    BackendConfigError,
    BackendFailure,
    DecodeError,
    EmptyIntersection,
    MissingTruth,
    ParseError,
    SmokedetectError,
    UndefinedMetric,
    UnknownLabel,
    ValidationError,
)
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    ManifestEntry,
    accumulate,
    compute_metrics,
    evaluate_results,
    gating_report,
    load_manifest,
    split_train_test,
)
from .geometry import (
    AdjustmentDeltas,
    CenterBox,
    CornerBox,
    DeltaRule,
    DeltaSpec,
    ImageExtent,
    adjust_face_box,
    adjust_hand_box,
    center_to_corner,
    clip_to_extent,
    contains,
    corner_to_center,
)
from .imaging import ImageRef, PixelRegion, crop, decode, encode_png, from_array, render_annotations
from .pipeline import (
    BatchOutcome,
    Counters,
    PipelineConfig,
    PipelineResult,
    Proposal,
    Strategy,
    aggregate_labels,
    extract_proposals,
    result_to_json,
    result_to_record,
    results_to_jsonl,
    run_batch,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustmentDeltas",
    "BackendConfigError",
    "BackendFailure",
    "BackendSuite",
    "BatchOutcome",
    "CenterBox",
    "ClassLabel",
    "ConfusionMatrix",
    "CornerBox",
    "Counters",
    "DecodeError",
    "DeltaRule",
    "DeltaSpec",
    "Detection",
    "DetectionSource",
    "EmptyIntersection",
    "EvalReport",
    "FaceProposalRaw",
    "HandProposalRaw",
    "ImageExtent",
    "ImageRef",
    "ManifestEntry",
    "MissingTruth",
    "ParseError",
    "PipelineConfig",
    "PipelineResult",
    "PixelRegion",
    "Proposal",
    "ProposalKind",
    "SmokedetectError",
    "Strategy",
    "UndefinedMetric",
    "UnknownLabel",
    "ValidationError",
    "accumulate",
    "adjust_face_box",
    "adjust_hand_box",
    "aggregate_labels",
    "center_to_corner",
    "clip_to_extent",
    "compute_metrics",
    "contains",
    "corner_to_center",
    "crop",
    "decode",
    "encode_png",
    "evaluate_results",
    "extract_proposals",
    "from_array",
    "gating_report",
    "label_for_score",
    "load_fixture_backend",
    "load_manifest",
    "proposal_key",
    "render_annotations",
    "result_to_json",
    "result_to_record",
    "results_to_jsonl",
    "run_batch",
    "run_pipeline",
    "split_train_test",
]
