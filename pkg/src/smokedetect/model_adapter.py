"""Adapter that satisfies the four inference contracts with serialized models.

A model directory holds TorchScript modules exported ahead of time:

    face.pt         input 1x3xHxW float32 in [0,1]; output Nx5 rows (cx, cy, w, h, conf)
    hand.pt         same input; output Nx5 rows (x1, y1, x2, y2, conf)
    cigarette.pt    same input (a crop); output Nx5 rows (x1, y1, x2, y2, conf),
                    coordinates local to the queried region
    classifier*.pt  input 1x3xSxS float32 in [0,1]; output logits of shape (1, 2)
                    with index 1 the smoker class

Multiple ``classifier*.pt`` files form an ensemble; their softmax
probabilities are averaged.  Crops are resized to a square (default 224,
bilinear) before classification.  Torch is imported lazily so the rest of
the package works without it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from .backends import (
    BackendSuite,
    ClassLabel,
    Detection,
    FaceProposalRaw,
    HandProposalRaw,
    label_for_score,
)
from .errors import BackendConfigError, BackendFailure, ValidationError
from .geometry import CenterBox, CornerBox
from .imaging import ImageRef, PixelRegion

FACE_MODEL = "face.pt"
HAND_MODEL = "hand.pt"
CIGARETTE_MODEL = "cigarette.pt"
CLASSIFIER_GLOB = "classifier*.pt"


@dataclass(frozen=True)
class ModelAdapterConfig:
    classifier_input_size: int = 224


def _to_tensor(pixels: np.ndarray) -> Any:
    import torch

    arr = np.asarray(pixels, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def _rows(output: Any) -> np.ndarray:
    arr = output.detach().cpu().numpy()
    if arr.size == 0:
        return np.zeros((0, 5), dtype=np.float32)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise BackendFailure(f"model output must be Nx5, got shape {arr.shape}")
    return arr


class _TorchBackend:
    concurrent_safe = False  # a loaded module is driven from one thread at a time

    def __init__(self, module: Any, name: str):
        self._module = module
        self.name = name

    def _forward(self, pixels: np.ndarray) -> Any:
        import torch

        try:
            with torch.no_grad():
                return self._module(_to_tensor(pixels))
        except BackendFailure:
            raise
        except Exception as exc:
            raise BackendFailure(f"{self.name}: {exc}") from exc


class TorchFaceDetector(_TorchBackend):
    def detect_faces(self, image: ImageRef) -> list[FaceProposalRaw]:
        proposals = []
        for cx, cy, w, h, conf in _rows(self._forward(image.pixels)):
            try:
                proposals.append(FaceProposalRaw(CenterBox(float(cx), float(cy), float(w), float(h)), float(conf)))
            except ValidationError as exc:
                raise BackendFailure(f"{self.name}: invalid box: {exc}") from exc
        proposals.sort(key=lambda p: -p.confidence)
        return proposals


class TorchHandDetector(_TorchBackend):
    def detect_hands(self, image: ImageRef) -> list[HandProposalRaw]:
        proposals = []
        for x1, y1, x2, y2, conf in _rows(self._forward(image.pixels)):
            try:
                proposals.append(HandProposalRaw(CornerBox(float(x1), float(y1), float(x2), float(y2)), float(conf)))
            except ValidationError as exc:
                raise BackendFailure(f"{self.name}: invalid box: {exc}") from exc
        proposals.sort(key=lambda p: -p.confidence)
        return proposals


class TorchCigaretteDetector(_TorchBackend):
    def detect_cigarettes(self, region: PixelRegion) -> list[Detection]:
        detections = []
        for x1, y1, x2, y2, conf in _rows(self._forward(region.pixels)):
            try:
                detections.append(Detection(CornerBox(float(x1), float(y1), float(x2), float(y2)), float(conf)))
            except ValidationError as exc:
                raise BackendFailure(f"{self.name}: invalid box: {exc}") from exc
        return detections


class TorchEnsembleClassifier:
    """Averages softmax probabilities over one or more classifier modules."""

    concurrent_safe = False

    def __init__(self, modules: list[Any], names: list[str], input_size: int):
        self._modules = modules
        self.name = "model:" + "+".join(names)
        self._input_size = input_size

    def classify_proposal(self, crop: PixelRegion) -> tuple[ClassLabel, float]:
        import torch

        size = self._input_size
        resized = Image.fromarray(np.asarray(crop.pixels)).resize((size, size), Image.BILINEAR)
        tensor = _to_tensor(np.asarray(resized, dtype=np.uint8))
        try:
            with torch.no_grad():
                probs = [torch.softmax(module(tensor), dim=1) for module in self._modules]
                smoker_prob = float(torch.stack(probs).mean(dim=0)[0, 1])
        except Exception as exc:
            raise BackendFailure(f"{self.name}: {exc}") from exc
        return label_for_score(smoker_prob), smoker_prob


def load_model_backend(
    model_dir: str | Path, config: ModelAdapterConfig | None = None
) -> BackendSuite:
    """Load a BackendSuite from a directory of TorchScript files.

    Raises BackendConfigError when torch is unavailable, the directory is
    missing, or any required model file is absent or unloadable.
    """
    if config is None:
        config = ModelAdapterConfig()
    try:
        import torch
    except ImportError as exc:
        raise BackendConfigError(
            "the model backend needs torch; install the 'model' extra"
        ) from exc

    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise BackendConfigError(f"model directory not found: {model_dir}")

    def load(path: Path) -> Any:
        try:
            module = torch.jit.load(str(path), map_location="cpu")
        except Exception as exc:
            raise BackendConfigError(f"cannot load {path.name}: {exc}") from exc
        module.eval()
        return module

    for required in (FACE_MODEL, HAND_MODEL, CIGARETTE_MODEL):
        if not (model_dir / required).is_file():
            raise BackendConfigError(f"missing model file {required} in {model_dir}")
    classifier_paths = sorted(model_dir.glob(CLASSIFIER_GLOB))
    if not classifier_paths:
        raise BackendConfigError(f"no {CLASSIFIER_GLOB} files in {model_dir}")

    return BackendSuite(
        face_detector=TorchFaceDetector(load(model_dir / FACE_MODEL), f"model:{FACE_MODEL}"),
        hand_detector=TorchHandDetector(load(model_dir / HAND_MODEL), f"model:{HAND_MODEL}"),
        proposal_classifier=TorchEnsembleClassifier(
            [load(p) for p in classifier_paths],
            [p.name for p in classifier_paths],
            config.classifier_input_size,
        ),
        cigarette_detector=TorchCigaretteDetector(
            load(model_dir / CIGARETTE_MODEL), f"model:{CIGARETTE_MODEL}"
        ),
    )
