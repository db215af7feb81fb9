"""Uniform access to agents: a remote chat-completions backend or a scripted policy."""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from .core import PersonaProfile, canonical_json, render_role_prompt
from .policies import ScriptedPolicy

__all__ = [
    "AgentHandle",
    "AuthMissing",
    "CacheCorrupt",
    "ChatMessage",
    "GatewayError",
    "NetworkError",
    "RateLimited",
    "RemoteChatClient",
    "ResponseCache",
    "Timeout",
    "build_messages",
    "cache_key",
    "cached_complete",
    "complete",
]

API_KEY_ENV = "PERSONA_GAUGE_API_KEY"
ENDPOINT_ENV = "PERSONA_GAUGE_ENDPOINT"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"


class GatewayError(RuntimeError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class NetworkError(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class Timeout(GatewayError):
    pass


class AuthMissing(GatewayError):
    pass


class CacheCorrupt(RuntimeError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


def build_messages(persona: PersonaProfile | None, prompt: str) -> list[ChatMessage]:
    """Role prompt (if any) followed by the task prompt; every query is stateless."""
    msgs = []
    if persona is not None:
        msgs.append(ChatMessage("system", render_role_prompt(persona)))
    msgs.append(ChatMessage("user", prompt))
    return msgs


def cache_key(model_id: str, messages: Sequence[ChatMessage], temperature: float, request_seed: int) -> str:
    payload = {
        "model": model_id,
        "messages": [m.to_dict() for m in messages],
        "temperature": float(temperature),
        "request_seed": int(request_seed),
    }
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response store: ``<root>/<key[:2]>/<key>.txt`` plus a ``.json`` sidecar."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def paths(self, key: str) -> tuple[Path, Path]:
        d = self.root / key[:2]
        return d / f"{key}.txt", d / f"{key}.json"

    def get(self, key: str) -> str | None:
        text_path, meta_path = self.paths(key)
        if not text_path.exists():
            return None
        data = text_path.read_bytes()
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CacheCorrupt(f"unreadable metadata for cache entry {key}") from exc
        if meta.get("key") != key or meta.get("sha256") != hashlib.sha256(data).hexdigest():
            raise CacheCorrupt(f"cache entry {key} failed its digest check")
        return data.decode("utf-8")

    def put(self, key: str, text: str) -> None:
        text_path, meta_path = self.paths(key)
        text_path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        meta = {
            "key": key,
            "sha256": hashlib.sha256(data).hexdigest(),
            "created": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        for path, payload in ((text_path, data), (meta_path, json.dumps(meta).encode("utf-8"))):
            tmp = path.with_suffix(path.suffix + f".tmp{threading.get_ident()}")
            tmp.write_bytes(payload)
            os.replace(tmp, path)

    def get_or_compute(self, key: str, compute: Callable[[], str]) -> str:
        with self._lock(key):
            hit = self.get(key)
            if hit is not None:
                return hit
            text = compute()
            self.put(key, text)
            return text


class RemoteChatClient:
    """HTTP client for an OpenAI-style chat-completions endpoint.

    Transient failures (connection errors, timeouts, HTTP 429 and 5xx) are
    retried up to `max_attempts` times with exponential backoff and full jitter.
    """

    def __init__(
        self,
        model_id: str,
        temperature: float = 1.0,
        endpoint: str | None = None,
        api_key: str | None = None,
        *,
        max_attempts: int = 5,
        base_delay: float = 1.0,
        backoff: float = 2.0,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_seed: int | None = None,
        cache: ResponseCache | None = None,
    ):
        self.model_id = model_id
        self.temperature = float(temperature)
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV) or DEFAULT_ENDPOINT
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.backoff = backoff
        self.timeout = timeout
        self.transport = transport
        self.sleep = sleep
        self.cache = cache
        self.calls = 0
        self._jitter = random.Random(jitter_seed)
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    def _http(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.timeout, transport=self.transport)
            return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def _post(self, messages: Sequence[ChatMessage]) -> str:
        if not self.api_key:
            raise AuthMissing(f"no credential: set {API_KEY_ENV}", attempts=0)
        body = {
            "model": self.model_id,
            "messages": [m.to_dict() for m in messages],
            "temperature": self.temperature,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last: GatewayError | None = None
        for attempt in range(1, self.max_attempts + 1):
            self.calls += 1
            try:
                resp = self._http().post(self.endpoint, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = Timeout(f"request timed out: {exc}", attempt)
            except httpx.TransportError as exc:
                last = NetworkError(f"transport failure: {exc}", attempt)
            else:
                if resp.status_code == 429:
                    last = RateLimited("rate limited (HTTP 429)", attempt)
                elif resp.status_code >= 500:
                    last = NetworkError(f"server error (HTTP {resp.status_code})", attempt)
                elif resp.status_code in (401, 403):
                    raise AuthMissing(f"credential rejected (HTTP {resp.status_code})", attempt)
                elif resp.status_code >= 400:
                    raise NetworkError(f"request rejected (HTTP {resp.status_code}): {resp.text[:200]}", attempt)
                else:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise NetworkError(f"malformed response body: {exc}", attempt) from exc
            if attempt < self.max_attempts:
                cap = self.base_delay * self.backoff ** (attempt - 1)
                self.sleep(self._jitter.uniform(0.0, cap))
        assert last is not None
        raise last

    def chat(self, messages: Sequence[ChatMessage], request_seed: int = 0) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if self.cache is None:
            return self._post(messages)
        return cached_complete(self.cache, self, messages, request_seed)


def cached_complete(cache: ResponseCache, client: RemoteChatClient,
                    messages: Sequence[ChatMessage], request_seed: int = 0) -> str:
    key = cache_key(client.model_id, messages, client.temperature, request_seed)
    return cache.get_or_compute(key, lambda: client._post(messages))


@dataclass
class AgentHandle:
    """An agent under test: persona (for labeling and role prompts) plus a backend."""

    persona: PersonaProfile | None
    policy: ScriptedPolicy | None = None
    client: RemoteChatClient | None = None

    def __post_init__(self):
        if (self.policy is None) == (self.client is None):
            raise ValueError("an agent needs exactly one of a scripted policy or a remote client")

    @property
    def backend(self) -> str:
        return "scripted" if self.policy is not None else "remote-chat"

    @property
    def label(self) -> str:
        return str(self.persona.code) if self.persona is not None else "NONE"


def complete(handle: AgentHandle, messages: Sequence[ChatMessage],
             rng: np.random.Generator | None = None, request_seed: int = 0) -> str:
    """Send `messages` to the agent and return its reply text.

    Scripted policies see only the final user message and draw from `rng`.
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    if handle.policy is not None:
        if rng is None:
            rng = np.random.default_rng(request_seed)
        return handle.policy.respond(messages[-1].content, rng)
    return handle.client.chat(messages, request_seed)
