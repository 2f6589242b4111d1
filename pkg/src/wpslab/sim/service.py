"""Serving layer for the simulated locate service.

`handle_locate` is the single wire-level entry point; the HTTP server and the
in-process transport both delegate to it, so both paths share byte-identical
semantics (400 on malformed requests, 429 with Retry-After under the
per-client rate-limit mitigation).
"""

from __future__ import annotations

import json
import logging
import math
import threading
from datetime import timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..protocol import DecodeError, TransportReply, decode_request, encode_response
from .world import RateLimited, WorldModel

logger = logging.getLogger(__name__)


def handle_locate(world: WorldModel, body: bytes, client_key: str) -> tuple[int, bytes, float | None]:
    """Decode, serve, encode. Returns (status, payload, retry_after_seconds)."""
    try:
        request = decode_request(body)
    except DecodeError as e:
        return 400, json.dumps({"error": str(e)}).encode(), None
    result = world.serve(request, client_key)
    if isinstance(result, RateLimited):
        return 429, json.dumps({"error": "rate limited"}).encode(), result.retry_after_s
    return 200, encode_response(result), None


class LocalTransport:
    """In-process transport against a world: full wire encode/decode, no sockets."""

    def __init__(self, world: WorldModel, client_key: str = "local"):
        self.world = world
        self.client_key = client_key

    def __call__(self, body: bytes) -> TransportReply:
        status, payload, retry_after = handle_locate(self.world, body, self.client_key)
        return TransportReply(status, payload, retry_after)


class SimServer:
    """Threaded HTTP front end for a world.

    POST /v1/locate  -- the locate API
    GET  /v1/status  -- day counter, date, and servable-identity count
    """

    def __init__(self, world: WorldModel, host: str = "127.0.0.1", port: int = 0):
        self.world = world
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def _reply(self, status: int, payload: bytes, retry_after: float | None = None):
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                if retry_after is not None:
                    self.send_header("Retry-After", f"{math.ceil(retry_after * 1000) / 1000:.3f}")
                self.end_headers()
                self.wfile.write(payload)

            def do_POST(self):
                if self.path != "/v1/locate":
                    self._reply(404, b'{"error":"not found"}')
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                key = self.headers.get("X-Client-Id") or self.client_address[0]
                try:
                    status, payload, retry_after = handle_locate(outer.world, body, key)
                except Exception:
                    logger.exception("locate handler failed")
                    self._reply(500, b'{"error":"internal error"}')
                    return
                self._reply(status, payload, retry_after)

            def do_GET(self):
                if self.path != "/v1/status":
                    self._reply(404, b'{"error":"not found"}')
                    return
                w = outer.world
                payload = json.dumps(
                    {"day": w.day, "date": w.today.isoformat(), "listed": len(w.view)}
                ).encode()
                self._reply(200, payload)

            def log_message(self, fmt, *args):
                logger.debug("%s - %s", self.address_string(), fmt % args)

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "SimServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        logger.info("simulated locate service on %s (day %d)", self.url, self.world.day)
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def tick(self, days: int = 1) -> None:
        """Advance the world; serving threads keep reading the previous view
        until the new one is swapped in."""
        for _ in range(days):
            self.world.advance()

    def __enter__(self) -> "SimServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
