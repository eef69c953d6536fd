"""Bounding-box algebra for region proposals.

Two box representations flow through the pipeline: face detectors emit
center-format boxes (center x, center y, width, height) and hand detectors
emit corner-format boxes (top-left, bottom-right).  All coordinates are
real-valued pixels with the y axis growing downward; rasterization to
integer pixel indices happens only when a box is cropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyIntersection, ValidationError


def _check_finite(owner: str, **fields: float) -> None:
    for name, value in fields.items():
        if not math.isfinite(value):
            raise ValidationError(f"{owner}.{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CenterBox:
    """Box given by its center point plus width and height."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        _check_finite("CenterBox", cx=self.cx, cy=self.cy, w=self.w, h=self.h)
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"CenterBox needs positive size, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class CornerBox:
    """Box given by its top-left (x1, y1) and bottom-right (x2, y2) corners."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        _check_finite("CornerBox", x1=self.x1, y1=self.y1, x2=self.x2, y2=self.y2)
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise ValidationError(
                f"CornerBox corners must be ordered, got ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1


@dataclass(frozen=True)
class AdjustmentDeltas:
    """Absolute pixel shifts applied when enlarging a proposal box."""

    delta_h: float
    delta_v: float

    def __post_init__(self):
        _check_finite("AdjustmentDeltas", delta_h=self.delta_h, delta_v=self.delta_v)
        if self.delta_h < 0 or self.delta_v < 0:
            raise ValidationError(
                f"deltas must be nonnegative, got ({self.delta_h}, {self.delta_v})"
            )


@dataclass(frozen=True)
class ImageExtent:
    """Pixel dimensions of an image; the clipping domain for boxes."""

    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"extent must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class DeltaSpec:
    """One adjustment axis: an absolute pixel count or a fraction of a box dimension."""

    value: float
    proportional: bool = False

    def __post_init__(self):
        _check_finite("DeltaSpec", value=self.value)
        if self.value < 0:
            raise ValidationError(f"delta spec must be nonnegative, got {self.value}")


@dataclass(frozen=True)
class DeltaRule:
    """Horizontal and vertical adjustment specs for one proposal kind.

    Proportional values scale with the box: a face rule scales horizontal by
    box width and vertical by box height, while a hand rule scales both axes
    by max(width, height).
    """

    horizontal: DeltaSpec
    vertical: DeltaSpec

    @classmethod
    def absolute(cls, delta_h: float, delta_v: float) -> DeltaRule:
        return cls(DeltaSpec(delta_h), DeltaSpec(delta_v))

    @classmethod
    def proportional(cls, h_fraction: float, v_fraction: float) -> DeltaRule:
        return cls(DeltaSpec(h_fraction, True), DeltaSpec(v_fraction, True))


# Defaults keep adjustment scale-invariant: face boxes widen by a quarter of
# their width and shift down a fifth of their height; hand boxes grow on all
# sides by 0.15x their larger dimension.
DEFAULT_FACE_DELTAS = DeltaRule.proportional(0.25, 0.20)
DEFAULT_HAND_DELTAS = DeltaRule.proportional(0.15, 0.15)


def face_deltas_for(box: CenterBox, rule: DeltaRule | AdjustmentDeltas) -> AdjustmentDeltas:
    """Resolve a face delta rule against a concrete box."""
    if isinstance(rule, AdjustmentDeltas):
        return rule
    dh = rule.horizontal.value * box.w if rule.horizontal.proportional else rule.horizontal.value
    dv = rule.vertical.value * box.h if rule.vertical.proportional else rule.vertical.value
    return AdjustmentDeltas(dh, dv)


def hand_deltas_for(box: CornerBox, rule: DeltaRule | AdjustmentDeltas) -> AdjustmentDeltas:
    """Resolve a hand delta rule against a concrete box."""
    if isinstance(rule, AdjustmentDeltas):
        return rule
    ref = max(box.width, box.height)
    dh = rule.horizontal.value * ref if rule.horizontal.proportional else rule.horizontal.value
    dv = rule.vertical.value * ref if rule.vertical.proportional else rule.vertical.value
    return AdjustmentDeltas(dh, dv)


def center_to_corner(b: CenterBox) -> CornerBox:
    """Convert a center-format box to corner format."""
    return CornerBox(b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2)


def corner_to_center(b: CornerBox) -> CenterBox:
    """Convert a corner-format box to center format (inverse of center_to_corner)."""
    return CenterBox((b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2, b.x2 - b.x1, b.y2 - b.y1)


def adjust_face_box(b: CenterBox, d: AdjustmentDeltas) -> CenterBox:
    """Shift a face box down by delta_v and widen it by delta_h; height is preserved.

    The downward shift plus wider box covers cigarette orientations around
    the lips, which sit below the detected face center.
    """
    return CenterBox(b.cx, b.cy + d.delta_v, b.w + d.delta_h, b.h)


def adjust_hand_box(b: CornerBox, d: AdjustmentDeltas) -> CornerBox:
    """Expand a hand box symmetrically by delta_h / delta_v on each side."""
    return CornerBox(b.x1 - d.delta_h, b.y1 - d.delta_v, b.x2 + d.delta_h, b.y2 + d.delta_v)


def clip_to_extent(b: CornerBox, e: ImageExtent) -> CornerBox:
    """Intersect a box with the image rectangle [0, width] x [0, height].

    Raises EmptyIntersection when the intersection has zero area, which
    signals that the proposal must be discarded.
    """
    x1 = max(b.x1, 0.0)
    y1 = max(b.y1, 0.0)
    x2 = min(b.x2, float(e.width))
    y2 = min(b.y2, float(e.height))
    if x1 >= x2 or y1 >= y2:
        raise EmptyIntersection(
            f"box ({b.x1}, {b.y1}, {b.x2}, {b.y2}) does not intersect {e.width}x{e.height}"
        )
    return CornerBox(x1, y1, x2, y2)


def contains(outer: CornerBox, inner: CornerBox) -> bool:
    """True iff inner lies within outer componentwise."""
    return (
        outer.x1 <= inner.x1
        and outer.y1 <= inner.y1
        and inner.x2 <= outer.x2
        and inner.y2 <= outer.y2
    )


def rasterize(b: CornerBox) -> tuple[int, int, int, int]:
    """Integer pixel bounds of a box: floor the top-left, ceil the bottom-right."""
    return (math.floor(b.x1), math.floor(b.y1), math.ceil(b.x2), math.ceil(b.y2))
