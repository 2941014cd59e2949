"""Chat-completions-style HTTP backend with concurrency and budget limits.

One request per query at temperature 0; retry policy lives in
:func:`vlmloc.backends.base.query`, not here. Images are sent as base64
data URLs immediately after the text block, in badge order.
"""

from __future__ import annotations

import base64
import collections
import os
import threading
import time
from dataclasses import dataclass

import httpx

from ..errors import BackendError, ConfigError
from ..imaging import encode_jpeg
from .base import QueryRequest


class RateLimiter:
    """Bounds in-flight requests and requests-per-minute across threads."""

    def __init__(self, max_concurrency: int = 4, requests_per_minute: int | None = None):
        if max_concurrency < 1:
            raise ConfigError(f"max_concurrency must be >= 1, got {max_concurrency}")
        if requests_per_minute is not None and requests_per_minute < 1:
            raise ConfigError(f"requests_per_minute must be >= 1, got {requests_per_minute}")
        self._slots = threading.Semaphore(max_concurrency)
        self._budget = requests_per_minute
        self._lock = threading.Lock()
        self._stamps: collections.deque[float] = collections.deque()

    def _wait_for_budget(self, clock=time.monotonic, sleep=time.sleep) -> None:
        if self._budget is None:
            return
        while True:
            with self._lock:
                now = clock()
                while self._stamps and now - self._stamps[0] >= 60.0:
                    self._stamps.popleft()
                if len(self._stamps) < self._budget:
                    self._stamps.append(now)
                    return
                wait = 60.0 - (now - self._stamps[0])
            sleep(max(wait, 0.01))

    def __enter__(self):
        self._slots.acquire()
        try:
            self._wait_for_budget()
        except BaseException:
            self._slots.release()
            raise
        return self

    def __exit__(self, *exc):
        self._slots.release()
        return False


@dataclass(frozen=True)
class HttpBackendConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_tokens: int = 300
    jpeg_quality: int = 90
    max_concurrency: int = 4
    requests_per_minute: int | None = None


class HttpChatBackend:
    """OpenAI-compatible chat endpoint speaking image+text user messages."""

    def __init__(self, config: HttpBackendConfig, client: httpx.Client | None = None):
        self.config = config
        self.limiter = RateLimiter(config.max_concurrency, config.requests_per_minute)
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "") if self.config.api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, request: QueryRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": request.prompt_text}]
        for im in request.images:
            b64 = base64.b64encode(encode_jpeg(im, self.config.jpeg_quality)).decode("ascii")
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:image/jpeg;base64,{b64}"}}
            )
        return {
            "model": self.config.model,
            "temperature": 0,
            "max_tokens": self.config.max_tokens,
            "messages": [{"role": "user", "content": content}],
        }

    def complete(self, request: QueryRequest) -> str:
        with self.limiter:
            try:
                resp = self._client.post(
                    self.config.endpoint,
                    json=self._payload(request),
                    headers=self._headers(),
                )
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
            except httpx.HTTPError as exc:
                raise BackendError(f"chat request failed: {exc}") from exc
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendError(f"malformed chat response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError(f"chat response content is not text: {type(text).__name__}")
        return text
