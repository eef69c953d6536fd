#!/usr/bin/env python3
"""Walkthrough of the bounding-box algebra: formats, adjustments, clipping.

Run: python demos/01_box_geometry.py
"""

from smokedetect.geometry import (
    AdjustmentDeltas,
    CenterBox,
    CornerBox,
    DEFAULT_FACE_DELTAS,
    DEFAULT_HAND_DELTAS,
    ImageExtent,
    adjust_face_box,
    adjust_hand_box,
    center_to_corner,
    clip_to_extent,
    contains,
    corner_to_center,
    face_deltas_for,
    hand_deltas_for,
    rasterize,
)

# Face detectors emit center-format boxes: (cx, cy, w, h).
face = CenterBox(cx=50, cy=40, w=20, h=30)
print("face box (center format):", face)

# Hand detectors emit corner-format boxes: (x1, y1, x2, y2).
hand = CornerBox(x1=10, y1=10, x2=30, y2=40)
print("hand box (corner format):", hand)

# The two formats convert back and forth without loss.
as_corner = center_to_corner(face)
print("face as corners:", as_corner)
print("round trip is the identity:", corner_to_center(as_corner) == face)

# A cigarette sits near the lips, below the face center, so the face box is
# shifted down and widened before cropping.  Height stays as detected.
deltas = AdjustmentDeltas(delta_h=10, delta_v=5)
print("\nadjusted face box:", adjust_face_box(face, deltas))

# Hand boxes instead grow symmetrically on all four sides.
print("adjusted hand box:", adjust_hand_box(hand, deltas))
print("adjustment always contains the original:",
      contains(adjust_hand_box(hand, deltas), hand))

# Default rules are proportional, so behavior is scale-invariant:
# faces widen by 25% of width and shift down 20% of height; hands grow by
# 15% of their larger dimension.
print("\ndefault face deltas for this box:", face_deltas_for(face, DEFAULT_FACE_DELTAS))
print("default hand deltas for this box:", hand_deltas_for(hand, DEFAULT_HAND_DELTAS))

# Adjusted boxes can leave the image; clipping intersects them with it.
extent = ImageExtent(width=64, height=48)
overhanging = adjust_hand_box(CornerBox(50, 34, 63, 47), AdjustmentDeltas(5, 5))
print("\noverhanging box:", overhanging)
clipped = clip_to_extent(overhanging, extent)
print("clipped to a 64x48 image:", clipped)

# Coordinates remain real-valued until crop time, when the box is rasterized
# outward (floor the top-left, ceil the bottom-right).
print("rasterized pixel bounds:", rasterize(clipped))
