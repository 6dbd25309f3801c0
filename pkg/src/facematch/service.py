"""HTTP facade over the full parameter -> prompt -> image -> match flow.

The server holds a store snapshot loaded at startup plus shared, immutable
pipeline/generator instances; handlers are stateless on top of those, so
requests may be served concurrently. Every error body carries a machine
readable code and human text, never a stack trace.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import params as params_mod
from .facepipe import (
    FacePipeline,
    ImageDecodeError,
    NoFaceDetected,
    build_pipeline,
)
from .genclient import (
    BackendRejected,
    BackendUnavailable,
    GeneratedImage,
    GeneratorConfig,
    InvalidImagePayload,
    generate_image,
)
from .vecstore import EmptyStore, MatchResult, VectorStore

DEFAULT_K = 5
MAX_K = 100
_IMAGE_CACHE_CAP = 256


def _error_body(code: str, message: str, details=None) -> dict:
    error: dict = {"code": code, "message": message}
    if details is not None:
        error["details"] = details
    return {"error": error}


def _error(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(status_code=status, content=_error_body(code, message, details))


class ImageCache:
    """Content-addressed in-memory cache of encoded images."""

    def __init__(self, capacity: int = _IMAGE_CACHE_CAP):
        self.capacity = capacity
        self._items: OrderedDict[str, tuple[bytes, str]] = OrderedDict()

    def put(self, data: bytes, media_type: str) -> str:
        image_id = hashlib.sha256(data).hexdigest()
        self._items.pop(image_id, None)
        self._items[image_id] = (data, media_type)
        while len(self._items) > self.capacity:
            self._items.popitem(last=False)
        return image_id

    def get(self, image_id: str) -> Optional[tuple[bytes, str]]:
        item = self._items.get(image_id)
        if item is not None:
            self._items.move_to_end(image_id)
        return item


def _media_type(fmt: str) -> str:
    return "image/png" if fmt == "png" else "image/jpeg"


def _sniff_media_type(data: bytes) -> str:
    return "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"


def _parse_k(value, default: int = DEFAULT_K) -> int:
    if value is None:
        return default
    try:
        k = int(value)
    except (TypeError, ValueError):
        raise ValueError("k must be an integer")
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be between 1 and {MAX_K}")
    return k


def _match_payload(results: list[MatchResult], store: VectorStore) -> list[dict]:
    matches = []
    for result in results:
        stored = store.get(result.id)
        meta = stored.metadata if stored else {}
        matches.append(
            {
                "profile_id": result.id,
                "name": meta.get("name", ""),
                "score": result.score,
                "rank": result.rank,
                "image_url": meta.get("image_url", ""),
            }
        )
    return matches


def create_app(
    store: VectorStore,
    pipeline: FacePipeline | None = None,
    generator: GeneratorConfig | None = None,
    assets_dir: str | Path | None = None,
) -> FastAPI:
    """Assemble the API over a loaded store snapshot.

    The web UI bundle, when present, is mounted at the root; all data
    endpoints live under /api/v1 plus /healthz.
    """
    pipeline = pipeline or build_pipeline("stub")
    generator = generator or GeneratorConfig(backend="stub")
    app = FastAPI(title="facematch", docs_url=None, redoc_url=None)
    cache = ImageCache()
    app.state.store = store
    app.state.pipeline = pipeline
    app.state.generator = generator
    app.state.images = cache

    @app.exception_handler(Exception)
    async def unhandled(request: Request, exc: Exception):
        return _error(500, "internal_error", "internal server error")

    def _validation_details(exc: params_mod.ParameterError) -> list[dict]:
        return [
            {
                "kind": issue.kind,
                "field": issue.field,
                "value": issue.value,
                "message": issue.message,
            }
            for issue in exc.issues
        ]

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ValueError("request body must be a JSON object")
        if not isinstance(body, dict):
            raise ValueError("request body must be a JSON object")
        return body

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "profile_count": len(store)}

    @app.get("/api/v1/vocabularies")
    async def vocabularies():
        return {"fields": params_mod.field_schema()}

    @app.post("/api/v1/prompt")
    async def prompt_endpoint(request: Request):
        try:
            raw = await _json_body(request)
        except ValueError as exc:
            return _error(400, "malformed_request", str(exc))
        try:
            parameters = params_mod.validate_parameters(raw)
        except params_mod.ParameterError as exc:
            return _error(400, exc.code, str(exc), _validation_details(exc))
        return {"prompt": params_mod.build_prompt(parameters)}

    def _embed_and_search(image_bytes: bytes, k: int):
        box, embedding = pipeline.embed_image(image_bytes)
        results = store.search(embedding, k)
        return box, results

    @app.post("/api/v1/match")
    async def match_endpoint(request: Request):
        try:
            body = await _json_body(request)
        except ValueError as exc:
            return _error(400, "malformed_request", str(exc))
        raw = body.get("parameters")
        if not isinstance(raw, dict):
            return _error(400, "malformed_request", "missing 'parameters' object")
        try:
            k = _parse_k(body.get("k"))
        except ValueError as exc:
            return _error(400, "malformed_request", str(exc))
        generate = body.get("generate", True)
        if not isinstance(generate, bool):
            return _error(400, "malformed_request", "'generate' must be a boolean")
        try:
            parameters = params_mod.validate_parameters(raw)
        except params_mod.ParameterError as exc:
            return _error(400, exc.code, str(exc), _validation_details(exc))
        prompt = params_mod.build_prompt(parameters)
        if not generate:
            return {"prompt": prompt, "generated_image_id": "", "matches": []}
        try:
            image: GeneratedImage = generate_image(prompt, generator)
        except BackendUnavailable as exc:
            return _error(502, exc.code, str(exc))
        except (BackendRejected, InvalidImagePayload) as exc:
            return _error(502, exc.code, str(exc))
        image_id = cache.put(image.data, _media_type(image.format))
        try:
            _, results = _embed_and_search(image.data, k)
        except NoFaceDetected as exc:
            return _error(422, exc.code, str(exc))
        except EmptyStore as exc:
            return _error(409, exc.code, str(exc))
        return {
            "prompt": prompt,
            "generated_image_id": image_id,
            "matches": _match_payload(results, store),
        }

    @app.post("/api/v1/match-by-image")
    async def match_by_image(image: UploadFile, k: Optional[str] = None):
        try:
            k_val = _parse_k(k)
        except ValueError as exc:
            return _error(400, "malformed_request", str(exc))
        data = await image.read()
        try:
            box, results = _embed_and_search(data, k_val)
        except ImageDecodeError as exc:
            return _error(415, exc.code, str(exc))
        except NoFaceDetected as exc:
            return _error(422, exc.code, str(exc))
        except EmptyStore as exc:
            return _error(409, exc.code, str(exc))
        image_id = cache.put(data, _sniff_media_type(data))
        return {
            "prompt": None,
            "generated_image_id": image_id,
            "matches": _match_payload(results, store),
        }

    @app.get("/api/v1/images/{image_id}")
    async def get_image(image_id: str):
        item = cache.get(image_id)
        if item is None:
            return _error(404, "not_found", f"unknown image id {image_id!r}")
        data, media_type = item
        return Response(content=data, media_type=media_type)

    @app.get("/api/v1/profiles/{profile_id}")
    async def get_profile(profile_id: str):
        stored = store.get(profile_id)
        if stored is None:
            return _error(404, "not_found", f"unknown profile id {profile_id!r}")
        return {
            "id": stored.id,
            "name": stored.metadata.get("name", ""),
            "image_url": stored.metadata.get("image_url", ""),
        }

    if assets_dir is not None and Path(assets_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(assets_dir), html=True), name="ui")

    return app
