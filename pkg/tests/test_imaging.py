from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from smokedetect import imaging
from smokedetect.backends import ClassLabel, Detection, ProposalKind
from smokedetect.errors import DecodeError, EmptyIntersection, ValidationError
from smokedetect.geometry import CornerBox, ImageExtent
from smokedetect.imaging import BANNER_HEIGHT, render_annotations
from smokedetect.pipeline import Proposal

from conftest import make_image


def _write_png(path, arr):
    Image.fromarray(arr).save(path, format="PNG")


class TestDecode:
    def test_solid_red_png(self, tmp_path):
        arr = np.zeros((4, 4, 3), dtype=np.uint8)
        arr[:, :] = (255, 0, 0)
        path = tmp_path / "red.png"
        _write_png(path, arr)
        image = imaging.decode(path)
        assert image.extent == ImageExtent(4, 4)
        assert image.id == "red"
        assert np.array_equal(image.pixels, arr)

    def test_truncated_file(self, tmp_path):
        arr = np.zeros((16, 16, 3), dtype=np.uint8)
        path = tmp_path / "whole.png"
        _write_png(path, arr)
        broken = tmp_path / "broken.png"
        broken.write_bytes(path.read_bytes()[:40])
        with pytest.raises(DecodeError):
            imaging.decode(broken)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DecodeError):
            imaging.decode(tmp_path / "nope.png")

    def test_jpeg_and_png_same_extent(self, tmp_path):
        arr = np.random.default_rng(7).integers(0, 255, size=(6, 9, 3), dtype=np.uint8)
        png = tmp_path / "a.png"
        jpg = tmp_path / "a.jpg"
        _write_png(png, arr)
        Image.fromarray(arr).save(jpg, format="JPEG")
        assert imaging.decode(png).extent == imaging.decode(jpg).extent == ImageExtent(9, 6)

    def test_pixels_are_read_only(self):
        image = make_image("ro")
        with pytest.raises(ValueError):
            image.pixels[0, 0] = 0


class TestFromArray:
    def test_rejects_wrong_shape(self):
        with pytest.raises(ValidationError):
            imaging.from_array("bad", np.zeros((4, 4), dtype=np.uint8))

    def test_rejects_wrong_dtype(self):
        with pytest.raises(ValidationError):
            imaging.from_array("bad", np.zeros((4, 4, 3), dtype=np.float32))


class TestCrop:
    def test_full_extent_is_whole_image(self):
        image = make_image("full", width=4, height=4)
        region = imaging.crop(image, CornerBox(0, 0, 4, 4))
        assert np.array_equal(region.pixels, image.pixels)
        assert region.box == CornerBox(0, 0, 4, 4)
        assert region.source == "full"

    def test_top_left_block(self):
        arr = np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3)
        image = imaging.from_array("tl", arr)
        region = imaging.crop(image, CornerBox(0, 0, 2, 2))
        assert np.array_equal(region.pixels, arr[0:2, 0:2])

    def test_out_of_bounds_box_clipped_matches_direct_indexing(self):
        rng = np.random.default_rng(11)
        arr = rng.integers(0, 255, size=(20, 30, 3), dtype=np.uint8)
        image = imaging.from_array("oob", arr)
        region = imaging.crop(image, CornerBox(-3.5, 10.2, 12.7, 25.0))
        # Independent oracle: clip by hand, floor/ceil, then slice the raw array.
        x1, y1 = max(-3.5, 0), max(10.2, 0)
        x2, y2 = min(12.7, 30), min(25.0, 20)
        expected = arr[int(np.floor(y1)) : int(np.ceil(y2)), int(np.floor(x1)) : int(np.ceil(x2))]
        assert np.array_equal(region.pixels, expected)
        assert region.box == CornerBox(0, 10, 13, 20)

    def test_crop_dimensions_rule(self):
        image = make_image("dims", width=40, height=40)
        region = imaging.crop(image, CornerBox(1.2, 2.8, 3.1, 7.0))
        assert region.pixels.shape[1] == int(np.ceil(3.1)) - int(np.floor(1.2))
        assert region.pixels.shape[0] == int(np.ceil(7.0)) - int(np.floor(2.8))

    def test_disjoint_box_propagates(self):
        image = make_image("dis", width=10, height=10)
        with pytest.raises(EmptyIntersection):
            imaging.crop(image, CornerBox(11, 11, 12, 12))

    def test_crop_is_read_only_on_source(self):
        image = make_image("ro2", width=8, height=8)
        before = image.pixels.copy()
        region = imaging.crop(image, CornerBox(1, 1, 5, 5))
        region.pixels[:] = 0
        assert np.array_equal(image.pixels, before)

    def test_tag_carried(self):
        image = make_image("tag", width=8, height=8)
        assert imaging.crop(image, CornerBox(0, 0, 4, 4), tag="face:0").tag == "face:0"


def _proposal(kind, index, image, box, label):
    region = imaging.crop(image, box, tag=f"{kind.value}:{index}")
    return Proposal(
        kind=kind,
        index=index,
        raw_box=box,
        adjusted_box=box,
        crop=region,
        label=label,
        score=1.0 if label is ClassLabel.SMOKER else 0.0,
    )


class TestRenderAnnotations:
    def test_no_annotations_only_banner_differs(self):
        image = make_image("plain", width=40, height=32)
        out = render_annotations(image, [], [], verdict=0)
        diff = np.any(out.pixels != image.pixels, axis=2)
        assert not diff[BANNER_HEIGHT:].any()
        assert diff[:BANNER_HEIGHT].any()

    def test_source_unmodified(self):
        image = make_image("src", width=40, height=32)
        before = image.pixels.copy()
        render_annotations(image, [], [], verdict=1)
        assert np.array_equal(image.pixels, before)

    def test_single_detection_changes_only_outline(self):
        image = make_image("det", width=40, height=40)
        det = Detection(box=CornerBox(10, 20, 20, 30), confidence=0.9)
        out = render_annotations(image, [], [det], verdict=1)
        diff = np.any(out.pixels != image.pixels, axis=2)
        body = diff[BANNER_HEIGHT:, :]
        # Pixel-diff oracle: build the expected outline mask by hand.
        expected = np.zeros_like(body)
        expected[20 - BANNER_HEIGHT : 30 - BANNER_HEIGHT, 10:20] = True
        inner = expected.copy()
        inner[:] = False
        inner[22 - BANNER_HEIGHT : 28 - BANNER_HEIGHT, 12:18] = True
        expected &= ~inner
        assert np.array_equal(body, expected)

    def test_proposal_overlay_diff_confined_to_proposal_rect_and_banner(self):
        image = make_image("prop", width=48, height=48)
        proposal = _proposal(ProposalKind.FACE, 0, image, CornerBox(20, 24, 36, 40), ClassLabel.SMOKER)
        out = render_annotations(image, [proposal], [], verdict=1)
        diff = np.any(out.pixels != image.pixels, axis=2)
        outside = diff.copy()
        outside[:BANNER_HEIGHT, :] = False
        outside[24:40, 20:36] = False
        assert not outside.any()
        assert diff[24:40, 20:36].any()

    def test_face_and_hand_colors(self):
        image = make_image("colors", width=48, height=48)
        face = _proposal(ProposalKind.FACE, 0, image, CornerBox(4, 20, 16, 32), ClassLabel.NON_SMOKER)
        hand = _proposal(ProposalKind.HAND, 0, image, CornerBox(30, 30, 44, 44), ClassLabel.NON_SMOKER)
        out = render_annotations(image, [face, hand], [], verdict=0)
        assert tuple(out.pixels[20, 4]) == imaging.FACE_COLOR
        assert tuple(out.pixels[30, 30]) == imaging.HAND_COLOR

    def test_annotated_id_and_extent(self):
        image = make_image("meta", width=20, height=20)
        out = render_annotations(image, [], [], verdict=0)
        assert out.extent == image.extent
        assert out.id != image.id


class TestEncode:
    def test_png_round_trip(self, tmp_path):
        image = make_image("round", width=12, height=9, fill=(1, 2, 3))
        path = tmp_path / "round.png"
        imaging.encode_png(image, path)
        back = imaging.decode(path)
        assert np.array_equal(back.pixels, image.pixels)
