"""Text-to-image backends: a remote inference endpoint and an offline stub.

The remote backend posts ``{"inputs": "<prompt>"}`` with a bearer token and
expects raw image bytes back; which hosted model sits behind the endpoint is
deployment configuration, not code. The stub renders a procedural face-like
placeholder whose pixels are a pure function of the prompt text, so the full
pipeline (including face detection downstream) runs without network access
and equal prompts produce byte-identical images.
"""

from __future__ import annotations

import hashlib
import io
import os
import random
import time
from dataclasses import dataclass
from urllib.parse import urlparse

import requests
from PIL import Image, ImageDraw

from .errors import FaceMatchError

ENV_URL = "FACEMATCH_IMAGEGEN_URL"
ENV_TOKEN = "FACEMATCH_IMAGEGEN_TOKEN"

_RETRY_BACKOFF_S = 2.0
_BODY_EXCERPT_CHARS = 200
_MIN_SIDE = 64


class GenClientError(FaceMatchError):
    code = "genclient_error"


class BackendUnavailable(GenClientError):
    code = "backend_unavailable"

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class BackendRejected(GenClientError):
    code = "backend_rejected"

    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"backend returned status {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class InvalidImagePayload(GenClientError):
    code = "invalid_image_payload"


@dataclass(frozen=True)
class GeneratorConfig:
    backend: str = "stub"  # stub | remote
    endpoint_url: str = ""
    auth_token: str = ""
    timeout: float = 60.0
    retries: int = 2

    def __post_init__(self):
        if self.backend not in ("stub", "remote"):
            raise ValueError(f"unknown generator backend {self.backend!r}")
        if self.backend == "remote" and not self.endpoint_url:
            raise ValueError("remote backend requires endpoint_url")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @classmethod
    def from_env(cls, backend: str = "remote", **overrides) -> "GeneratorConfig":
        return cls(
            backend=backend,
            endpoint_url=overrides.pop("endpoint_url", os.environ.get(ENV_URL, "")),
            auth_token=overrides.pop("auth_token", os.environ.get(ENV_TOKEN, "")),
            **overrides,
        )


@dataclass(frozen=True)
class GeneratedImage:
    data: bytes
    format: str  # png | jpeg
    prompt: str
    backend_id: str


def _validate_image(data: bytes) -> str:
    """Decode-check the payload; returns the normalized format name."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            fmt = (img.format or "").lower()
            width, height = img.size
    except Exception as exc:
        raise InvalidImagePayload(f"response is not a decodable image: {exc}") from exc
    if fmt == "jpg":
        fmt = "jpeg"
    if fmt not in ("png", "jpeg"):
        raise InvalidImagePayload(f"unsupported image format {fmt!r}")
    if width < _MIN_SIDE or height < _MIN_SIDE:
        raise InvalidImagePayload(
            f"image is {width}x{height}, need at least {_MIN_SIDE}x{_MIN_SIDE}"
        )
    return fmt


def generate_image(
    prompt: str,
    cfg: GeneratorConfig,
    *,
    session: requests.Session | None = None,
    sleep=time.sleep,
) -> GeneratedImage:
    """Obtain a face image for a prompt from the configured backend."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if cfg.backend == "stub":
        data = render_stub_face(prompt)
        return GeneratedImage(data=data, format="png", prompt=prompt, backend_id="stub")
    return _generate_remote(prompt, cfg, session=session, sleep=sleep)


def _generate_remote(prompt, cfg, *, session, sleep) -> GeneratedImage:
    http = session or requests
    headers = {"Authorization": f"Bearer {cfg.auth_token}"} if cfg.auth_token else {}
    attempts = cfg.retries + 1
    last_failure = ""
    last_status: tuple[int, str] | None = None
    for attempt in range(attempts):
        if attempt:
            sleep(_RETRY_BACKOFF_S)
        try:
            resp = http.post(
                cfg.endpoint_url,
                json={"inputs": prompt},
                headers=headers,
                timeout=cfg.timeout,
            )
        except requests.RequestException as exc:
            # never echo headers or the exception's request object: the
            # auth token must not leak into diagnostics
            last_failure = f"{type(exc).__name__} contacting generation endpoint"
            last_status = None
            continue
        if 200 <= resp.status_code < 300:
            fmt = _validate_image(resp.content)
            backend_id = f"remote:{urlparse(cfg.endpoint_url).netloc}"
            return GeneratedImage(
                data=resp.content, format=fmt, prompt=prompt, backend_id=backend_id
            )
        excerpt = resp.text[:_BODY_EXCERPT_CHARS]
        if resp.status_code == 429 or resp.status_code >= 500:
            last_status = (resp.status_code, excerpt)  # momentarily busy: retry
            continue
        raise BackendRejected(resp.status_code, excerpt)
    if last_status is not None:
        raise BackendRejected(*last_status)
    raise BackendUnavailable(last_failure or "generation endpoint unreachable", attempts)


# ---------------------------------------------------------------------------
# stub renderer
# ---------------------------------------------------------------------------

_SKIN_TONES = [
    (244, 214, 186), (224, 188, 150), (198, 158, 118),
    (166, 123, 91), (126, 88, 62), (96, 64, 44),
]
_IRIS_COLORS = [
    (40, 30, 25), (92, 60, 35), (120, 96, 48),
    (66, 102, 60), (70, 95, 135), (115, 115, 120),
]
_HAIR_COLORS = [(35, 28, 24), (70, 50, 30), (120, 90, 50), (150, 150, 150)]

STUB_SIZE = 256


def render_stub_face(prompt: str) -> bytes:
    """Deterministic face-like placeholder derived entirely from the prompt.

    Layout parameters, palette picks, and jitter all come from a PRNG seeded
    with a hash of the prompt text; the prompt's beard/moustache words toggle
    the matching glyphs so generated corpora vary visibly.
    """
    seed = int.from_bytes(hashlib.sha256(prompt.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)

    size = STUB_SIZE
    bg = tuple(rng.randrange(140, 230) for _ in range(3))
    img = Image.new("RGB", (size, size), bg)
    draw = ImageDraw.Draw(img)

    skin = _SKIN_TONES[rng.randrange(len(_SKIN_TONES))]
    cx = size // 2 + rng.randrange(-6, 7)
    cy = size // 2 + rng.randrange(-4, 9)
    rx = 62 + rng.randrange(-10, 14)
    ry = 84 + rng.randrange(-10, 14)
    draw.ellipse((cx - rx, cy - ry, cx + rx, cy + ry), fill=skin)

    hair = _HAIR_COLORS[rng.randrange(len(_HAIR_COLORS))]
    draw.chord(
        (cx - rx, cy - ry - rng.randrange(0, 8), cx + rx, cy - ry // 4),
        start=180, end=360, fill=hair,
    )

    iris = _IRIS_COLORS[rng.randrange(len(_IRIS_COLORS))]
    eye_dx = 26 + rng.randrange(-4, 6)
    eye_y = cy - 18 + rng.randrange(-5, 6)
    eye_rx = 11 + rng.randrange(-2, 4)
    eye_ry = 6 + rng.randrange(-1, 4)
    for side in (-1, 1):
        ex = cx + side * eye_dx
        draw.ellipse(
            (ex - eye_rx, eye_y - eye_ry, ex + eye_rx, eye_y + eye_ry),
            fill=(250, 250, 250),
        )
        pr = max(2, eye_ry - 2)
        draw.ellipse((ex - pr, eye_y - pr, ex + pr, eye_y + pr), fill=iris)
        brow_y = eye_y - eye_ry - 6 - rng.randrange(0, 4)
        draw.line(
            (ex - eye_rx - 2, brow_y + rng.randrange(-2, 3), ex + eye_rx + 2, brow_y),
            fill=hair, width=3 + rng.randrange(0, 3),
        )

    nose_w = 7 + rng.randrange(0, 6)
    nose_y = cy + 14 + rng.randrange(-4, 5)
    shade = tuple(max(0, c - 38) for c in skin)
    draw.polygon(
        [(cx, eye_y + eye_ry + 4), (cx - nose_w, nose_y), (cx + nose_w, nose_y)],
        fill=shade,
    )

    mouth_w = 24 + rng.randrange(-4, 9)
    mouth_y = cy + 42 + rng.randrange(-5, 6)
    mouth_h = 7 + rng.randrange(-2, 5)
    draw.ellipse(
        (cx - mouth_w, mouth_y - mouth_h, cx + mouth_w, mouth_y + mouth_h),
        fill=(168, 78, 86),
    )

    text = prompt.lower()
    if "beard" in text:
        draw.chord(
            (cx - rx + 8, mouth_y - 18, cx + rx - 8, cy + ry + 4),
            start=0, end=180, fill=hair,
        )
        draw.ellipse(
            (cx - mouth_w, mouth_y - mouth_h, cx + mouth_w, mouth_y + mouth_h),
            fill=(168, 78, 86),
        )
    if "moustache" in text:
        draw.ellipse(
            (cx - mouth_w - 4, mouth_y - mouth_h - 12, cx + mouth_w + 4, mouth_y - mouth_h + 2),
            fill=hair,
        )

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
