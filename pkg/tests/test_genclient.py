import io
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from PIL import Image

from facematch import genclient as G
from tests.conftest import GOLDEN_FEMALE_PROMPT

SECOND_PROMPT = (
    "a face of an adult Female with fair skin tone, almond-shaped eye shape "
    "with black eyes, straight nose, and full lips, thick eyebrows, "
    "oval face shape, square jawline, pointed chin"
)


def png_bytes(size=(96, 96), color=(120, 140, 160)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="PNG")
    return buf.getvalue()


class MockBackend:
    """Counts requests; scripted status/body per call."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []
        handler_self = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                handler_self.requests.append(
                    {
                        "body": self.rfile.read(length),
                        "auth": self.headers.get("Authorization"),
                    }
                )
                status, body = (
                    handler_self.script.pop(0)
                    if handler_self.script
                    else (503, b"busy")
                )
                self.send_response(status)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/generate"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def no_sleep():
    return lambda _s: None


def test_stub_is_deterministic():
    cfg = G.GeneratorConfig(backend="stub")
    a = G.generate_image(GOLDEN_FEMALE_PROMPT, cfg)
    b = G.generate_image(GOLDEN_FEMALE_PROMPT, cfg)
    assert a.data == b.data
    assert a.format == "png"
    assert a.backend_id == "stub"


def test_stub_distinct_prompts_distinct_bytes():
    cfg = G.GeneratorConfig(backend="stub")
    a = G.generate_image(GOLDEN_FEMALE_PROMPT, cfg)
    b = G.generate_image(SECOND_PROMPT, cfg)
    assert a.data != b.data


def test_stub_determinism_over_random_prompts():
    import random

    rng = random.Random(20240901)
    cfg = G.GeneratorConfig(backend="stub")
    prompts = [
        "face prompt " + "".join(rng.choice("abcdefgh ") for _ in range(30))
        for _ in range(100)
    ]
    first = [G.generate_image(p, cfg).data for p in prompts]
    second = [G.generate_image(p, cfg).data for p in prompts]
    assert first == second


def test_stub_output_decodes_large_enough():
    data = G.render_stub_face("any prompt")
    with Image.open(io.BytesIO(data)) as img:
        assert img.size[0] >= 64 and img.size[1] >= 64


def test_stub_beard_toggle_changes_pixels():
    base = G.render_stub_face("a face of an adult Male with olive skin tone")
    bearded = G.render_stub_face(
        "a face of an adult Male with olive skin tone, and a full beard"
    )
    assert base != bearded


def test_config_validation():
    with pytest.raises(ValueError):
        G.GeneratorConfig(backend="remote", endpoint_url="")
    with pytest.raises(ValueError):
        G.GeneratorConfig(backend="stub", timeout=0)
    with pytest.raises(ValueError):
        G.GeneratorConfig(backend="warp")


def test_config_from_env(monkeypatch):
    monkeypatch.setenv(G.ENV_URL, "http://example.invalid/gen")
    monkeypatch.setenv(G.ENV_TOKEN, "sekret")
    cfg = G.GeneratorConfig.from_env()
    assert cfg.endpoint_url == "http://example.invalid/gen"
    assert cfg.auth_token == "sekret"


def test_remote_success_posts_prompt_and_bearer_token(no_sleep):
    backend = MockBackend([(200, png_bytes())])
    try:
        cfg = G.GeneratorConfig(
            backend="remote", endpoint_url=backend.url, auth_token="token-abc"
        )
        image = G.generate_image("hello face", cfg, sleep=no_sleep)
        assert image.format == "png"
        assert image.backend_id.startswith("remote:127.0.0.1")
        assert len(backend.requests) == 1
        assert backend.requests[0]["auth"] == "Bearer token-abc"
        assert b'"inputs"' in backend.requests[0]["body"]
        assert b"hello face" in backend.requests[0]["body"]
    finally:
        backend.close()


def test_remote_retries_exactly_retries_plus_one(no_sleep):
    backend = MockBackend([(503, b"busy")] * 10)
    try:
        cfg = G.GeneratorConfig(
            backend="remote", endpoint_url=backend.url, retries=2
        )
        with pytest.raises(G.BackendRejected) as excinfo:
            G.generate_image("p", cfg, sleep=no_sleep)
        assert len(backend.requests) == 3  # retries + 1, no storm
        assert excinfo.value.status == 503
    finally:
        backend.close()


def test_remote_recovers_after_busy(no_sleep):
    backend = MockBackend([(503, b"busy"), (200, png_bytes())])
    try:
        cfg = G.GeneratorConfig(backend="remote", endpoint_url=backend.url, retries=2)
        image = G.generate_image("p", cfg, sleep=no_sleep)
        assert image.format == "png"
        assert len(backend.requests) == 2
    finally:
        backend.close()


def test_remote_client_error_rejects_immediately(no_sleep):
    backend = MockBackend([(400, b"bad prompt")])
    try:
        cfg = G.GeneratorConfig(backend="remote", endpoint_url=backend.url, retries=2)
        with pytest.raises(G.BackendRejected) as excinfo:
            G.generate_image("p", cfg, sleep=no_sleep)
        assert len(backend.requests) == 1
        assert excinfo.value.status == 400
        assert "bad prompt" in str(excinfo.value)
    finally:
        backend.close()


def test_remote_unreachable_reports_attempts(no_sleep):
    cfg = G.GeneratorConfig(
        backend="remote", endpoint_url="http://127.0.0.1:9/nothing", retries=2
    )
    with pytest.raises(G.BackendUnavailable) as excinfo:
        G.generate_image("p", cfg, sleep=no_sleep)
    assert excinfo.value.attempts == 3
    assert "3 attempts" in str(excinfo.value)


def test_auth_token_never_in_diagnostics(no_sleep):
    token = "super-secret-token-value"
    backend = MockBackend([(500, b"boom")] * 5)
    try:
        cfg = G.GeneratorConfig(
            backend="remote", endpoint_url=backend.url,
            auth_token=token, retries=1,
        )
        with pytest.raises(G.GenClientError) as excinfo:
            G.generate_image("p", cfg, sleep=no_sleep)
        assert token not in str(excinfo.value)
    finally:
        backend.close()
    cfg = G.GeneratorConfig(
        backend="remote", endpoint_url="http://127.0.0.1:9/x",
        auth_token=token, retries=0,
    )
    with pytest.raises(G.GenClientError) as excinfo:
        G.generate_image("p", cfg, sleep=no_sleep)
    assert token not in str(excinfo.value)


def test_remote_non_image_payload_rejected(no_sleep):
    backend = MockBackend([(200, b"this is not an image")])
    try:
        cfg = G.GeneratorConfig(backend="remote", endpoint_url=backend.url)
        with pytest.raises(G.InvalidImagePayload):
            G.generate_image("p", cfg, sleep=no_sleep)
    finally:
        backend.close()


def test_remote_tiny_image_rejected(no_sleep):
    backend = MockBackend([(200, png_bytes(size=(32, 32)))])
    try:
        cfg = G.GeneratorConfig(backend="remote", endpoint_url=backend.url)
        with pytest.raises(G.InvalidImagePayload):
            G.generate_image("p", cfg, sleep=no_sleep)
    finally:
        backend.close()


def test_empty_prompt_rejected():
    with pytest.raises(ValueError):
        G.generate_image("", G.GeneratorConfig(backend="stub"))
