"""Local HTTP inspection service: classify images against a loaded model.

The model is loaded once at startup and shared read-only across handler
threads, so concurrent identical requests return identical results. Endpoints:

    GET  /health       liveness probe
    GET  /model/info   classes, input size, width, quantized flag, param count
    POST /classify     raw PNG/JPEG body -> classification result JSON
    GET  /ui/...       static files for the operator console (when built)

Every non-2xx response is JSON with an "error" code.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import modelfile
from .data import decode_and_resize
from .errors import ConfigError, DecodeError, ModelFormatError
from .network import CLASS_NAMES, Mode, Network, forward, total_parameters

log = logging.getLogger(__name__)

MAX_BODY_BYTES = 16 * 1024 * 1024
DEFAULT_ADDR = "127.0.0.1:8760"
ACCEPTED_CONTENT_TYPES = ("image/png", "image/jpeg")


def default_ui_dir() -> Path | None:
    """Find built console assets: package static/ first, then ./frontend/dist."""
    candidates = [
        Path(__file__).parent / "static",
        Path.cwd() / "frontend" / "dist",
    ]
    for c in candidates:
        if (c / "index.html").is_file():
            return c
    return None


class ModelRuntime:
    """A loaded model plus the metadata the endpoints report."""

    def __init__(self, model_path, quantized: bool = False, ui_dir=None) -> None:
        loaded = modelfile.load_any(model_path)
        self.quantized = isinstance(loaded, modelfile.QuantizedModel)
        if quantized and not self.quantized:
            raise ModelFormatError(f"{model_path}: --quantized given but file is a float container")
        self.net: Network = modelfile.dequantize(loaded) if self.quantized else loaded
        self.total_parameters = total_parameters(self.net)
        self.width = self.net.width
        self.input_shape = self.net.input_shape
        self.ui_dir = Path(ui_dir) if ui_dir else default_ui_dir()

    def info(self) -> dict:
        return {
            "classes": list(CLASS_NAMES),
            "input_size": list(self.input_shape),
            "width": self.width,
            "quantized": self.quantized,
            "total_parameters": self.total_parameters,
        }

    def classify(self, body: bytes) -> dict:
        image = decode_and_resize(body)
        start = time.perf_counter()
        probs = forward(self.net, image, Mode.INFER)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        order = int(np.argmax(probs))
        return {
            "label": CLASS_NAMES[order],
            "probabilities": {name: float(p) for name, p in zip(CLASS_NAMES, probs)},
            "inference_ms": elapsed_ms,
            "model": {
                "width": self.width,
                "quantized": self.quantized,
                "total_parameters": self.total_parameters,
            },
        }


class _Handler(BaseHTTPRequestHandler):
    runtime: ModelRuntime  # set on the subclass by make_server

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str) -> None:
        self._send_json(status, {"error": code})

    def _read_body(self) -> bytes | None:
        length = self.headers.get("Content-Length")
        if length is None:
            self._error(400, "bad_image")
            return None
        try:
            n = int(length)
        except ValueError:
            self._error(400, "bad_image")
            return None
        if n > MAX_BODY_BYTES:
            # refuse before reading; the connection is dropped afterwards
            self.close_connection = True
            self._error(413, "too_large")
            return None
        return self.rfile.read(n)

    def do_GET(self) -> None:  # noqa: N802 (framework name)
        path = self.path.split("?", 1)[0]
        try:
            if path == "/health":
                self._send_json(200, {"status": "ok"})
            elif path == "/model/info":
                self._send_json(200, self.runtime.info())
            elif path == "/ui" or path.startswith("/ui/"):
                self._serve_static(path)
            elif path == "/classify":
                self._error(405, "method_not_allowed")
            else:
                self._error(404, "not_found")
        except Exception:
            log.exception("GET %s failed", path)
            self._error(500, "internal")

    def do_POST(self) -> None:  # noqa: N802
        path = self.path.split("?", 1)[0]
        try:
            if path != "/classify":
                if path in ("/health", "/model/info") or path.startswith("/ui"):
                    self._error(405, "method_not_allowed")
                else:
                    self._error(404, "not_found")
                return
            content_type = (self.headers.get("Content-Type") or "").split(";", 1)[0].strip().lower()
            body = self._read_body()
            if body is None:
                return
            if content_type not in ACCEPTED_CONTENT_TYPES:
                self._error(400, "bad_image")
                return
            try:
                result = self.runtime.classify(body)
            except DecodeError:
                self._error(400, "bad_image")
                return
            self._send_json(200, result)
        except Exception:
            log.exception("POST %s failed", path)
            self._error(500, "internal")

    def do_PUT(self) -> None:  # noqa: N802
        self._error(405, "method_not_allowed")

    do_DELETE = do_PUT
    do_PATCH = do_PUT

    def _serve_static(self, path: str) -> None:
        root = self.runtime.ui_dir
        if root is None:
            self._error(404, "not_found")
            return
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        try:
            target.relative_to(root.resolve())
        except ValueError:
            self._error(404, "not_found")
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._error(404, "not_found")
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"addr must be HOST:PORT, got {addr!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ConfigError(f"bad port in {addr!r}") from exc


def make_server(runtime: ModelRuntime, host: str, port: int) -> ThreadingHTTPServer:
    """Bind a threaded server; port 0 picks a free port (see server_address)."""
    handler = type("BoundHandler", (_Handler,), {"runtime": runtime})
    server = ThreadingHTTPServer((host, port), handler)
    # keep-alive connections must not block shutdown
    server.daemon_threads = True
    return server


def serve(model_path, addr: str = DEFAULT_ADDR, quantized: bool = False, ui_dir=None) -> None:
    """Load the model, bind, and serve until interrupted."""
    runtime = ModelRuntime(model_path, quantized=quantized, ui_dir=ui_dir)
    host, port = parse_addr(addr)
    server = make_server(runtime, host, port)
    host_out, port_out = server.server_address[:2]
    ui_state = str(runtime.ui_dir) if runtime.ui_dir else "not built"
    print(f"serving on http://{host_out}:{port_out} (ui: {ui_state})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
