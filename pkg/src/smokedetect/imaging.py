"""Image decode/encode, proposal crop extraction, and annotation rendering."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont, UnidentifiedImageError

from .errors import DecodeError, ValidationError
from .geometry import CornerBox, ImageExtent, clip_to_extent, rasterize

if TYPE_CHECKING:
    from .backends import Detection
    from .pipeline import Proposal

# Fixed rendering palette so annotated output is byte-stable for golden tests.
FACE_COLOR = (0, 0, 255)
HAND_COLOR = (0, 255, 0)
DETECTION_COLOR = (255, 0, 0)
STROKE_WIDTH = 2
BANNER_HEIGHT = 16
SMOKER_BANNER_COLOR = (200, 0, 0)
NON_SMOKER_BANNER_COLOR = (0, 128, 0)


@dataclass(frozen=True, eq=False)
class ImageRef:
    """A decoded RGB image; immutable after construction."""

    id: str
    extent: ImageExtent
    pixels: np.ndarray  # height x width x 3, uint8, read-only


@dataclass(frozen=True, eq=False)
class PixelRegion:
    """An owned crop of an image.

    ``box`` holds the integer-rasterized bounds in source-image coordinates.
    ``tag`` is an identity hint ("face:0", "hand:1", "image") used by replay
    backends that key their answers on which proposal a crop came from; real
    model backends ignore it.
    """

    source: str
    box: CornerBox
    pixels: np.ndarray
    tag: str | None = None


def from_array(image_id: str, pixels: np.ndarray) -> ImageRef:
    """Wrap an HxWx3 uint8 array as an image; the array is copied and frozen."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValidationError(f"expected HxWx3 uint8 pixels, got {arr.shape} {arr.dtype}")
    arr = arr.copy()
    arr.flags.writeable = False
    height, width = arr.shape[:2]
    return ImageRef(id=image_id, extent=ImageExtent(width, height), pixels=arr)


def decode(path: str | Path, image_id: str | None = None) -> ImageRef:
    """Decode a PNG or JPEG file to an RGB image.

    The image id defaults to the file stem; fixture annotations and manifest
    ground truth are joined on that id.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    return from_array(image_id if image_id is not None else path.stem, arr)


def crop(image: ImageRef, box: CornerBox, tag: str | None = None) -> PixelRegion:
    """Copy the pixels under a box, clipping it to the image first.

    Rasterization floors the top-left corner and ceils the bottom-right, so
    the crop covers every pixel the real-valued box touches.  Propagates
    EmptyIntersection when the box lies outside the image.
    """
    clipped = clip_to_extent(box, image.extent)
    x1, y1, x2, y2 = rasterize(clipped)
    pixels = image.pixels[y1:y2, x1:x2].copy()
    return PixelRegion(
        source=image.id,
        box=CornerBox(float(x1), float(y1), float(x2), float(y2)),
        pixels=pixels,
        tag=tag,
    )


def encode_png(image: ImageRef, path: str | Path) -> None:
    """Write an image as PNG."""
    Image.fromarray(np.asarray(image.pixels)).save(Path(path), format="PNG")


def _draw_rect(arr: np.ndarray, bounds: tuple[int, int, int, int], color: tuple[int, int, int]) -> None:
    # 2 px outline drawn inward, clamped to the array bounds.
    height, width = arr.shape[:2]
    x1, y1, x2, y2 = bounds
    x1c, y1c = max(x1, 0), max(y1, 0)
    x2c, y2c = min(x2, width), min(y2, height)
    if x1c >= x2c or y1c >= y2c:
        return
    s = STROKE_WIDTH
    arr[y1c : min(y1c + s, y2c), x1c:x2c] = color
    arr[max(y2c - s, y1c) : y2c, x1c:x2c] = color
    arr[y1c:y2c, x1c : min(x1c + s, x2c)] = color
    arr[y1c:y2c, max(x2c - s, x1c) : x2c] = color


def render_annotations(
    image: ImageRef,
    proposals: Sequence["Proposal"],
    detections: Iterable["Detection"],
    verdict: int,
) -> ImageRef:
    """Produce a new image with proposal boxes, detection boxes, and a verdict banner.

    Positive proposal crops are pasted back at their original coordinates
    before outlining, so the subject stays recognizable in monitoring output.
    The source image is never modified.
    """
    arr = image.pixels.copy()

    for proposal in proposals:
        if proposal.label is not None and int(proposal.label) == 1:
            x1, y1, x2, y2 = (int(v) for v in (
                proposal.crop.box.x1, proposal.crop.box.y1, proposal.crop.box.x2, proposal.crop.box.y2,
            ))
            arr[y1:y2, x1:x2] = proposal.crop.pixels

    for proposal in proposals:
        color = FACE_COLOR if proposal.kind.value == "face" else HAND_COLOR
        _draw_rect(arr, rasterize(proposal.adjusted_box), color)

    for detection in detections:
        _draw_rect(arr, rasterize(detection.box), DETECTION_COLOR)

    banner_color = SMOKER_BANNER_COLOR if int(verdict) == 1 else NON_SMOKER_BANNER_COLOR
    banner_text = "SMOKER" if int(verdict) == 1 else "NON-SMOKER"
    arr[: min(BANNER_HEIGHT, arr.shape[0]), :] = banner_color
    pil = Image.fromarray(arr)
    draw = ImageDraw.Draw(pil)
    draw.text((2, 2), banner_text, fill=(255, 255, 255), font=ImageFont.load_default())
    out = np.asarray(pil, dtype=np.uint8).copy()
    # Text may only touch the banner strip; clamp any drift.
    out[BANNER_HEIGHT:, :] = arr[BANNER_HEIGHT:, :]

    out.flags.writeable = False
    return ImageRef(id=f"{image.id}#annotated", extent=image.extent, pixels=out)
