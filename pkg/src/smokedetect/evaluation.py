"""Dataset manifests, deterministic splits, confusion-matrix metrics, and gating cost.

Smoker is the positive class throughout.
"""

from __future__ import annotations

import csv
import random
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .backends import ClassLabel
from .errors import MissingTruth, ParseError, UndefinedMetric, UnknownLabel, ValidationError
from .pipeline import PipelineResult

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

_LABEL_WORDS = {
    "0": ClassLabel.NON_SMOKER,
    "1": ClassLabel.SMOKER,
    "nonsmoker": ClassLabel.NON_SMOKER,
    "smoker": ClassLabel.SMOKER,
    "notsmoking": ClassLabel.NON_SMOKER,
    "smoking": ClassLabel.SMOKER,
}


def parse_label(text: str) -> ClassLabel:
    """Map a label word or digit to a class; raises UnknownLabel otherwise."""
    try:
        return _LABEL_WORDS[text.strip().lower()]
    except KeyError:
        raise UnknownLabel(f"unrecognized label {text!r}") from None


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    ground_truth: ClassLabel

    @property
    def image_id(self) -> str:
        return Path(self.image_path).stem


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Load a dataset manifest.

    A directory is read in the one-folder-per-class convention (subfolder
    names are label words such as ``smoking`` / ``notsmoking``); a file is
    read as CSV with a ``path,label`` header, paths resolved relative to the
    CSV's directory, labels being 0/1 or class words.
    """
    path = Path(path)
    if path.is_dir():
        return _load_manifest_dir(path)
    return _load_manifest_csv(path)


def _load_manifest_dir(root: Path) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    subdirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not subdirs:
        raise ParseError("no class subdirectories found", path=str(root))
    for subdir in subdirs:
        label = parse_label(subdir.name)
        for image_path in sorted(subdir.iterdir()):
            if image_path.suffix.lower() in IMAGE_SUFFIXES:
                entries.append(ManifestEntry(str(image_path), label))
    return entries


def _load_manifest_csv(path: Path) -> list[ManifestEntry]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read manifest: {exc}", path=str(path)) from exc

    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ParseError("manifest is empty (expected a path,label header)", path=str(path))
    header = [cell.strip().lower() for cell in rows[0]]
    if header[:2] != ["path", "label"]:
        raise ParseError(f"expected header 'path,label', got {rows[0]!r}", path=str(path))

    entries = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise ParseError("row needs path and label columns", line=line_no, path=str(path))
        rel = row[0].strip()
        image_path = Path(rel)
        if not image_path.is_absolute():
            image_path = path.parent / image_path
        entries.append(ManifestEntry(str(image_path), parse_label(row[1])))
    return entries


def write_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    """Write entries as a path,label CSV (labels as 0/1)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for entry in entries:
            writer.writerow([entry.image_path, int(entry.ground_truth)])


def split_train_test(
    entries: Sequence[ManifestEntry], ratio: float, seed: int
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Deterministic stratified split: |train| = round(ratio * N) overall,
    per-class counts within one of ratio * class size.

    Counting uses exact rational arithmetic so the same inputs always split
    identically; shuffling uses a seeded RNG.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"split ratio must be in (0, 1), got {ratio}")

    exact_ratio = Fraction(ratio)
    total = len(entries)
    target_train = round(exact_ratio * total)

    rng = random.Random(seed)
    groups: dict[ClassLabel, list[ManifestEntry]] = {}
    for entry in entries:
        groups.setdefault(entry.ground_truth, []).append(entry)

    ordered_labels = sorted(groups, key=int)
    base: dict[ClassLabel, int] = {}
    remainders: list[tuple[Fraction, ClassLabel]] = []
    for label in ordered_labels:
        share = exact_ratio * len(groups[label])
        base[label] = int(share)  # floor for nonnegative
        remainders.append((share - base[label], label))

    leftover = target_train - sum(base.values())
    # Largest remainder first; ties resolve by class order for determinism.
    remainders.sort(key=lambda item: (-item[0], int(item[1])))
    for _, label in remainders[:leftover]:
        base[label] += 1

    train: list[ManifestEntry] = []
    test: list[ManifestEntry] = []
    for label in ordered_labels:
        group = list(groups[label])
        rng.shuffle(group)
        take = base[label]
        train.extend(group[:take])
        test.extend(group[take:])

    if entries and not test:
        warnings.warn("split produced an empty test set", stacklevel=2)
    if entries and not train:
        warnings.warn("split produced an empty train set", stacklevel=2)
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/TN/FP/FN counts with smoker as the positive class."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValidationError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def merged(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


def accumulate(
    results: Iterable[PipelineResult], truth: Iterable[ManifestEntry] | Mapping[str, ClassLabel]
) -> ConfusionMatrix:
    """Fold pipeline verdicts against ground truth into a confusion matrix."""
    if isinstance(truth, Mapping):
        lookup = dict(truth)
    else:
        lookup = {}
        for entry in truth:
            if entry.image_id in lookup:
                raise ValidationError(f"duplicate image id {entry.image_id!r} in manifest")
            lookup[entry.image_id] = entry.ground_truth

    tp = tn = fp = fn = 0
    for result in results:
        if result.image_id not in lookup:
            raise MissingTruth(result.image_id)
        actual = lookup[result.image_id]
        predicted = result.verdict
        if predicted is ClassLabel.SMOKER:
            if actual is ClassLabel.SMOKER:
                tp += 1
            else:
                fp += 1
        else:
            if actual is ClassLabel.SMOKER:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


def precision(m: ConfusionMatrix) -> float:
    if m.tp + m.fp == 0:
        raise UndefinedMetric("precision undefined: no positive predictions")
    return m.tp / (m.tp + m.fp)


def recall(m: ConfusionMatrix) -> float:
    if m.tp + m.fn == 0:
        raise UndefinedMetric("recall undefined: no positive ground truth")
    return m.tp / (m.tp + m.fn)


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise UndefinedMetric("accuracy undefined: empty matrix")
    return (m.tp + m.tn) / m.total


@dataclass(frozen=True)
class Metrics:
    """Derived metrics; a metric whose denominator is zero is absent, not 0."""

    precision: float | None
    recall: float | None
    accuracy: float | None


def compute_metrics(m: ConfusionMatrix) -> Metrics:
    values = {}
    for name, fn in (("precision", precision), ("recall", recall), ("accuracy", accuracy)):
        try:
            values[name] = fn(m)
        except UndefinedMetric:
            values[name] = None
    return Metrics(**values)


def percent_int(numerator: int, denominator: int) -> str:
    """Whole-percent display, rounded half-to-even on the exact ratio."""
    if denominator == 0:
        return "n/a"
    return f"{round(Fraction(100 * numerator, denominator))}%"


def percent_2dec(numerator: int, denominator: int) -> str:
    """Two-decimal percent display, rounded half-to-even on the exact ratio."""
    if denominator == 0:
        return "n/a"
    return f"{float(round(Fraction(100 * numerator, denominator), 2)):.2f}%"


def display_percentages(m: ConfusionMatrix) -> dict[str, str]:
    """Rounded display strings: whole percents for precision/recall,
    two decimals for accuracy."""
    return {
        "precision": percent_int(m.tp, m.tp + m.fp),
        "recall": percent_int(m.tp, m.tp + m.fn),
        "accuracy": percent_2dec(m.tp + m.tn, m.total),
    }


@dataclass(frozen=True)
class EvalReport:
    """Metrics plus the gating-cost summary for a batch run."""

    matrix: ConfusionMatrix
    precision: float | None
    recall: float | None
    accuracy: float | None
    images: int
    smoker_verdicts: int
    total_detect_calls: int
    detect_calls_saved_vs_always_on: int
    empty_proposal_count: int


@dataclass(frozen=True)
class GatingSummary:
    """Detector-invocation accounting versus an always-on detector."""

    images: int
    smoker_verdicts: int
    total_detect_calls: int
    detect_calls_saved_vs_always_on: int
    empty_proposal_count: int


def gating_report(results: Sequence[PipelineResult]) -> GatingSummary:
    """Sum detector calls and count the full-image calls gating avoided.

    An always-on detector would run once per image; the gate skips every
    image with a non-smoker verdict.
    """
    smoker_verdicts = sum(1 for r in results if r.verdict is ClassLabel.SMOKER)
    return GatingSummary(
        images=len(results),
        smoker_verdicts=smoker_verdicts,
        total_detect_calls=sum(r.counters.detect_calls for r in results),
        detect_calls_saved_vs_always_on=len(results) - smoker_verdicts,
        empty_proposal_count=sum(1 for r in results if r.empty_proposals),
    )


def evaluate_results(
    results: Sequence[PipelineResult],
    truth: Iterable[ManifestEntry] | Mapping[str, ClassLabel],
) -> EvalReport:
    """Build the full report for a batch of results against ground truth."""
    matrix = accumulate(results, truth)
    metrics = compute_metrics(matrix)
    gating = gating_report(results)
    return EvalReport(
        matrix=matrix,
        precision=metrics.precision,
        recall=metrics.recall,
        accuracy=metrics.accuracy,
        images=gating.images,
        smoker_verdicts=gating.smoker_verdicts,
        total_detect_calls=gating.total_detect_calls,
        detect_calls_saved_vs_always_on=gating.detect_calls_saved_vs_always_on,
        empty_proposal_count=gating.empty_proposal_count,
    )


def report_to_record(report: EvalReport) -> dict:
    """JSON-ready dict with stable key order."""
    return {
        "matrix": {
            "tp": report.matrix.tp,
            "tn": report.matrix.tn,
            "fp": report.matrix.fp,
            "fn": report.matrix.fn,
        },
        "precision": report.precision,
        "recall": report.recall,
        "accuracy": report.accuracy,
        "images": report.images,
        "smoker_verdicts": report.smoker_verdicts,
        "total_detect_calls": report.total_detect_calls,
        "detect_calls_saved_vs_always_on": report.detect_calls_saved_vs_always_on,
        "empty_proposal_count": report.empty_proposal_count,
    }


def format_report_table(report: EvalReport) -> str:
    """Human-readable table: full-precision metrics plus rounded display."""
    m = report.matrix
    display = display_percentages(m)

    def metric_row(name: str, value: float | None) -> str:
        full = "undefined" if value is None else f"{value:.6f}"
        return f"{name:<12} {full:>12} {display[name]:>8}"

    lines = [
        f"{'metric':<12} {'value':>12} {'display':>8}",
        metric_row("precision", report.precision),
        metric_row("recall", report.recall),
        metric_row("accuracy", report.accuracy),
        "",
        f"confusion     tp={m.tp} tn={m.tn} fp={m.fp} fn={m.fn} (total {m.total})",
        f"images        {report.images} ({report.smoker_verdicts} smoker verdicts, "
        f"{report.empty_proposal_count} without proposals)",
        f"detector      {report.total_detect_calls} calls, "
        f"{report.detect_calls_saved_vs_always_on} full-image calls saved vs always-on",
    ]
    return "\n".join(lines)
