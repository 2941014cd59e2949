"""Record/replay of backend transcripts for offline regression runs.

The transcript format is JSON lines, one ``{"request_hash", "response_text"}``
object per query. Hashes cover the prompt text and losslessly-encoded image
bytes, so a replayed run must present byte-identical prompts.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

from ..errors import BackendError
from ..imaging import encode_png
from .base import QueryRequest, VlmBackend


def request_hash(request: QueryRequest) -> str:
    h = hashlib.sha256()
    h.update(request.prompt_text.encode("utf-8"))
    for im in request.images:
        h.update(hashlib.sha256(encode_png(im)).digest())
    return h.hexdigest()


class RecordingBackend:
    """Wraps any backend, appending each exchange to a transcript file."""

    def __init__(self, inner: VlmBackend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()

    def complete(self, request: QueryRequest) -> str:
        text = self.inner.complete(request)
        row = json.dumps(
            {"request_hash": request_hash(request), "response_text": text}, sort_keys=True
        )
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(row + "\n")
        return text


class ReplayBackend:
    """Serves recorded responses by request hash; unknown requests fail."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.is_file():
            raise BackendError(f"replay transcript does not exist: {self.path}")
        self.responses: dict[str, str] = {}
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                self.responses[row["request_hash"]] = row["response_text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BackendError(f"{self.path}:{lineno}: bad transcript row: {exc}") from exc

    def complete(self, request: QueryRequest) -> str:
        key = request_hash(request)
        try:
            return self.responses[key]
        except KeyError:
            raise BackendError(
                f"no recorded response for request hash {key[:16]}... in {self.path}"
            ) from None
