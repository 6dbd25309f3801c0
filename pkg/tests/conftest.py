import json
from pathlib import Path

import pytest

from facematch.facepipe import build_pipeline
from facematch.genclient import render_stub_face
from facematch.ingest import ImageFetcher, ingest_all, parse_manifest
from facematch.vecstore import IndexConfig, VectorStore

# the female selection whose prompt is the published golden string
FEMALE_RAW = {
    "gender": "Female",
    "age_group": "adult",
    "skin_tone": "fair",
    "eye_shape": "almond-shaped",
    "eye_color": "black",
    "eyebrow_shape": "straight",
    "nose_shape": "button",
    "lip_shape": "full",
    "face_shape": "oval",
    "jawline_shape": "square",
    "chin_shape": "pointed",
}

GOLDEN_FEMALE_PROMPT = (
    "a face of an adult Female with fair skin tone, almond-shaped eye shape "
    "with black eyes, button nose, and full lips, straight eyebrows, "
    "oval face shape, square jawline, pointed chin"
)

MALE_RAW = {
    "gender": "Male",
    "age_group": "adult",
    "skin_tone": "olive",
    "eye_shape": "round",
    "eye_color": "black",
    "eyebrow_shape": "thick",
    "nose_shape": "button",
    "lip_shape": "full",
    "face_shape": "round",
    "jawline_shape": "square",
    "chin_shape": "pointed",
    "beard": "full",
}


@pytest.fixture
def female_raw():
    return dict(FEMALE_RAW)


@pytest.fixture
def male_raw():
    return dict(MALE_RAW)


@pytest.fixture
def stub_pipeline():
    return build_pipeline("stub")


def write_corpus(
    root: Path,
    count: int,
    null_urls: int = 0,
    url_style: str = "file",
) -> Path:
    """Stub-rendered corpus: count face images + manifest, then null rows."""
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(1, count + 1):
        png = render_stub_face(f"synthetic corpus face {i}")
        path = images / f"face{i:04d}.png"
        path.write_bytes(png)
        url = f"file://{path}" if url_style == "file" else f"images/face{i:04d}.png"
        lines.append({"id": f"p{i:04d}", "name": f"Person {i}", "image_url": url})
    for j in range(null_urls):
        lines.append({"name": f"Null Url {j + 1}", "image_url": None})
    manifest = root / "manifest.jsonl"
    manifest.write_text(
        "".join(json.dumps(line) + "\n" for line in lines), encoding="utf-8"
    )
    return manifest


def ingest_corpus(root: Path, count: int, kind: str = "flat") -> VectorStore:
    manifest = write_corpus(root, count)
    records = parse_manifest(manifest)
    store = VectorStore(IndexConfig(kind=kind))
    pipeline = build_pipeline("stub")
    fetcher = ImageFetcher(base_dir=manifest.parent)
    ingest_all(records, store, pipeline, fetcher)
    return store
