from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from smokedetect import imaging


def make_image(image_id: str, width: int = 64, height: int = 48, fill=(90, 120, 150)):
    """Solid-color in-memory test image."""
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    arr[:, :] = fill
    return imaging.from_array(image_id, arr)


def write_fixture(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def golden_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "testdata" / "golden"
