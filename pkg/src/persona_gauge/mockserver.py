"""A local chat-completions endpoint backed by scripted policies, for offline end-to-end runs."""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

import numpy as np

from .policies import ScriptedPolicy

__all__ = ["MockChatServer"]


class MockChatServer:
    """Serve ``POST /v1/chat/completions`` on 127.0.0.1 with a scripted policy.

    The policy sees the last message of each request and draws from a
    generator seeded by a digest of the request body, so identical requests get
    identical replies.  ``fail_statuses`` are returned, in order, before any
    successful reply (for exercising client retries).
    """

    def __init__(self, policy: ScriptedPolicy, fail_statuses: Sequence[int] = (), port: int = 0):
        self.policy = policy
        self.requests: list[dict] = []
        self._failures = list(fail_statuses)
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                status, payload = server._handle(body, self.headers.get("Authorization", ""))
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def _handle(self, body: bytes, auth: str) -> tuple[int, dict]:
        with self._lock:
            if self._failures:
                return self._failures.pop(0), {"error": {"message": "injected failure"}}
        if not auth.startswith("Bearer ") or not auth[7:].strip():
            return 401, {"error": {"message": "missing credential"}}
        try:
            req = json.loads(body)
            prompt = req["messages"][-1]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            return 400, {"error": {"message": "malformed request"}}
        with self._lock:
            self.requests.append(req)
        seed = int.from_bytes(hashlib.sha256(body).digest()[:8], "big")
        with self._lock:
            reply = self.policy.respond(prompt, np.random.default_rng(seed))
        return 200, {
            "object": "chat.completion",
            "model": req.get("model", ""),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": reply},
                         "finish_reason": "stop"}],
        }

    def start(self) -> "MockChatServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
