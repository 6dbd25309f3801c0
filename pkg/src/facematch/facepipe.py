"""Face detection, crop normalization, and 512-d embedding.

Two interchangeable backend families:

* neural: pretrained ONNX models loaded through OpenCV's dnn module from
  paths in FACEMATCH_DETECTOR_MODEL / FACEMATCH_EMBEDDER_MODEL. The
  detector is expected to emit the common single-file layout (scores
  (1,N,2) plus normalized corner boxes (1,N,4)); the embedder maps a
  1x3x160x160 blob to a 512-vector.
* stub: deterministic stand-ins that keep every downstream contract
  (central box detection, hash-expanded embeddings) so the whole system
  runs offline with no model files.

Embeddings are always L2-normalized, which makes the vector store's dot
product a cosine score.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import FaceMatchError

EMBEDDING_DIM = 512
TENSOR_SIDE = 160

ENV_DETECTOR_MODEL = "FACEMATCH_DETECTOR_MODEL"
ENV_EMBEDDER_MODEL = "FACEMATCH_EMBEDDER_MODEL"


class FacePipeError(FaceMatchError):
    code = "facepipe_error"


class ImageDecodeError(FacePipeError):
    code = "image_decode_error"


class ModelLoadError(FacePipeError):
    code = "model_load_error"


class NoFaceDetected(FacePipeError):
    code = "no_face_detected"


class BoxOutOfBounds(FacePipeError):
    code = "box_out_of_bounds"


class ShapeMismatch(FacePipeError):
    code = "shape_mismatch"


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space face region, end-exclusive, with detection confidence."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    confidence: float

    def __post_init__(self):
        if not (0 <= self.x_min < self.x_max and 0 <= self.y_min < self.y_max):
            raise ValueError(f"degenerate bounding box {self!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def load_image(source: bytes | Image.Image) -> Image.Image:
    """Decode JPEG/PNG bytes (or pass through an Image) as RGB."""
    if isinstance(source, Image.Image):
        return source.convert("RGB")
    try:
        img = Image.open(io.BytesIO(source))
        img.load()
    except Exception as exc:
        raise ImageDecodeError(f"cannot decode image: {exc}") from exc
    return img.convert("RGB")


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------


class StubFaceDetector:
    """Always reports one box covering the central 80% of the image."""

    backend = "stub"

    def detect(self, image: bytes | Image.Image) -> list[BoundingBox]:
        img = load_image(image)
        w, h = img.size
        return [
            BoundingBox(
                x_min=w // 10,
                y_min=h // 10,
                x_max=w - w // 10,
                y_max=h - h // 10,
                confidence=1.0,
            )
        ]


def iou_nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression; returns kept indices, best first."""
    order = np.argsort(-scores, kind="stable")
    keep: list[int] = []
    while order.size:
        i = int(order[0])
        keep.append(i)
        if order.size == 1:
            break
        rest = order[1:]
        xx1 = np.maximum(boxes[i, 0], boxes[rest, 0])
        yy1 = np.maximum(boxes[i, 1], boxes[rest, 1])
        xx2 = np.minimum(boxes[i, 2], boxes[rest, 2])
        yy2 = np.minimum(boxes[i, 3], boxes[rest, 3])
        inter = np.maximum(xx2 - xx1, 0) * np.maximum(yy2 - yy1, 0)
        area_i = (boxes[i, 2] - boxes[i, 0]) * (boxes[i, 3] - boxes[i, 1])
        area_r = (boxes[rest, 2] - boxes[rest, 0]) * (boxes[rest, 3] - boxes[rest, 1])
        union = area_i + area_r - inter
        iou = np.where(union > 0, inter / union, 0.0)
        order = rest[iou <= iou_threshold]
    return keep


def scale_and_clamp_boxes(
    boxes: np.ndarray, scores: np.ndarray, width: int, height: int
) -> list[BoundingBox]:
    """Normalized corner boxes -> integer pixel BoundingBoxes inside the image."""
    out: list[BoundingBox] = []
    for (x1, y1, x2, y2), score in zip(boxes, scores):
        px1 = int(np.clip(round(float(x1) * width), 0, width - 1))
        py1 = int(np.clip(round(float(y1) * height), 0, height - 1))
        px2 = int(np.clip(round(float(x2) * width), px1 + 1, width))
        py2 = int(np.clip(round(float(y2) * height), py1 + 1, height))
        out.append(
            BoundingBox(px1, py1, px2, py2, confidence=float(np.clip(score, 0.0, 1.0)))
        )
    return out


class OnnxFaceDetector:
    """Face detector backed by a pretrained ONNX model via cv2.dnn."""

    backend = "neural"

    def __init__(
        self,
        model_path: str,
        input_size: tuple[int, int] = (320, 240),
        score_threshold: float = 0.6,
        nms_iou: float = 0.4,
    ):
        self.model_path = model_path
        self.input_size = input_size
        self.score_threshold = score_threshold
        self.nms_iou = nms_iou
        self._net = _load_onnx(model_path)

    def detect(self, image: bytes | Image.Image) -> list[BoundingBox]:
        img = load_image(image)
        width, height = img.size
        resized = img.resize(self.input_size, Image.BILINEAR)
        arr = np.asarray(resized, np.float32)
        blob = ((arr - 127.0) / 128.0).transpose(2, 0, 1)[None]
        self._net.setInput(blob)
        outputs = self._net.forward(self._net.getUnconnectedOutLayersNames())
        scores_raw = boxes_raw = None
        for out in outputs:
            if out.ndim == 3 and out.shape[-1] == 2:
                scores_raw = out[0, :, 1]
            elif out.ndim == 3 and out.shape[-1] == 4:
                boxes_raw = out[0]
        if scores_raw is None or boxes_raw is None:
            raise ModelLoadError(
                f"{self.model_path}: unexpected detector outputs "
                f"{[o.shape for o in outputs]}"
            )
        mask = scores_raw >= self.score_threshold
        if not mask.any():
            return []
        boxes, scores = boxes_raw[mask], scores_raw[mask]
        keep = iou_nms(boxes, scores, self.nms_iou)
        return scale_and_clamp_boxes(boxes[keep], scores[keep], width, height)


def _load_onnx(model_path: str):
    if not os.path.isfile(model_path):
        raise ModelLoadError(f"model file not found: {model_path}")
    try:
        import cv2
    except ImportError as exc:
        raise ModelLoadError(
            "neural backends need opencv (install the 'neural' extra)"
        ) from exc
    try:
        return cv2.dnn.readNetFromONNX(model_path)
    except Exception as exc:
        raise ModelLoadError(f"cannot load model {model_path}: {exc}") from exc


def select_largest(candidates: list[BoundingBox]) -> BoundingBox:
    """Largest-area candidate; ties go to higher confidence, then first seen."""
    if not candidates:
        raise NoFaceDetected("no face candidates in image")
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.area > best.area or (
            cand.area == best.area and cand.confidence > best.confidence
        ):
            best = cand
    return best


# ---------------------------------------------------------------------------
# crop + embedding
# ---------------------------------------------------------------------------


def crop_and_normalize(image: bytes | Image.Image, box: BoundingBox) -> np.ndarray:
    """Crop the box, bilinear-resize to 160x160, map values to ~[-1, 1].

    Channel values v become (v - 127.5) / 128.0, the convention the
    embedding model family expects.
    """
    img = load_image(image)
    w, h = img.size
    if box.x_max > w or box.y_max > h:
        raise BoxOutOfBounds(f"box {box} exceeds image bounds {w}x{h}")
    crop = img.crop((box.x_min, box.y_min, box.x_max, box.y_max))
    if crop.size != (TENSOR_SIDE, TENSOR_SIDE):
        crop = crop.resize((TENSOR_SIDE, TENSOR_SIDE), Image.BILINEAR)
    arr = np.asarray(crop, np.float32)
    return (arr - 127.5) / 128.0


def _check_tensor(tensor: np.ndarray) -> np.ndarray:
    tensor = np.asarray(tensor, np.float32)
    if tensor.shape != (TENSOR_SIDE, TENSOR_SIDE, 3):
        raise ShapeMismatch(
            f"face tensor has shape {tensor.shape}, "
            f"expected ({TENSOR_SIDE}, {TENSOR_SIDE}, 3)"
        )
    return tensor


class StubFaceEmbedder:
    """Expands a hash of the tensor bytes into a deterministic unit vector."""

    backend = "stub"

    def embed(self, tensor: np.ndarray) -> np.ndarray:
        tensor = _check_tensor(tensor)
        base = hashlib.sha256(tensor.tobytes()).digest()
        need = EMBEDDING_DIM * 4
        chunks = []
        counter = 0
        total = 0
        while total < need:
            block = hashlib.sha256(base + counter.to_bytes(4, "little")).digest()
            chunks.append(block)
            total += len(block)
            counter += 1
        raw = b"".join(chunks)[:need]
        values = np.frombuffer(raw, "<u4").astype(np.float64) / 2.0**32 - 0.5
        values /= np.linalg.norm(values)
        out = values.astype(np.float32)
        out /= np.linalg.norm(out)
        return out


class OnnxFaceEmbedder:
    """Pretrained inception-residual face embedder via cv2.dnn."""

    backend = "neural"

    def __init__(self, model_path: str):
        self.model_path = model_path
        self._net = _load_onnx(model_path)

    def embed(self, tensor: np.ndarray) -> np.ndarray:
        tensor = _check_tensor(tensor)
        blob = tensor.transpose(2, 0, 1)[None]
        self._net.setInput(blob)
        out = np.asarray(self._net.forward(), np.float32).reshape(-1)
        if out.shape[0] != EMBEDDING_DIM:
            raise ShapeMismatch(
                f"{self.model_path}: embedder produced {out.shape[0]} values, "
                f"expected {EMBEDDING_DIM}"
            )
        norm = float(np.linalg.norm(out))
        if norm == 0.0:
            raise ShapeMismatch(f"{self.model_path}: embedder produced a zero vector")
        return out / norm


# ---------------------------------------------------------------------------
# annotation + pipeline wiring
# ---------------------------------------------------------------------------


def annotate_detection(image: bytes | Image.Image, box: BoundingBox) -> bytes:
    """Copy of the image with a 2px pure-red rectangle along the box border."""
    img = load_image(image)
    w, h = img.size
    if box.x_max > w or box.y_max > h:
        raise BoxOutOfBounds(f"box {box} exceeds image bounds {w}x{h}")
    arr = np.array(img)
    red = np.array([255, 0, 0], np.uint8)
    t = 2
    x0, y0, x1, y1 = box.x_min, box.y_min, box.x_max, box.y_max
    arr[y0 : min(y0 + t, y1), x0:x1] = red
    arr[max(y1 - t, y0) : y1, x0:x1] = red
    arr[y0:y1, x0 : min(x0 + t, x1)] = red
    arr[y0:y1, max(x1 - t, x0) : x1] = red
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


class FacePipeline:
    """detect -> select largest -> crop -> embed, over pluggable backends."""

    def __init__(self, detector, embedder):
        self.detector = detector
        self.embedder = embedder

    @property
    def backend(self) -> str:
        return self.detector.backend

    def detect_candidates(self, image: bytes | Image.Image) -> list[BoundingBox]:
        return self.detector.detect(image)

    def embed_image(self, image: bytes | Image.Image) -> tuple[BoundingBox, np.ndarray]:
        img = load_image(image)
        box = select_largest(self.detector.detect(img))
        tensor = crop_and_normalize(img, box)
        return box, self.embedder.embed(tensor)


def build_pipeline(
    backend: str = "stub",
    detector_model: str | None = None,
    embedder_model: str | None = None,
) -> FacePipeline:
    """Construct a pipeline; neural model paths fall back to the env vars."""
    if backend == "stub":
        return FacePipeline(StubFaceDetector(), StubFaceEmbedder())
    if backend != "neural":
        raise ValueError(f"unknown pipeline backend {backend!r}")
    detector_model = detector_model or os.environ.get(ENV_DETECTOR_MODEL, "")
    embedder_model = embedder_model or os.environ.get(ENV_EMBEDDER_MODEL, "")
    if not detector_model or not embedder_model:
        raise ModelLoadError(
            "neural backend needs detector and embedder model paths "
            f"({ENV_DETECTOR_MODEL} / {ENV_EMBEDDER_MODEL} or flags)"
        )
    return FacePipeline(
        OnnxFaceDetector(detector_model), OnnxFaceEmbedder(embedder_model)
    )
