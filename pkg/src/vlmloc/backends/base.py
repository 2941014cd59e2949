"""Backend protocol and the retry/fallback query wrapper.

A backend turns a :class:`QueryRequest` into raw reply text; parsing and
retry policy live here so every backend (HTTP, oracle, replay) shares one
code path and one set of guarantees.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol

from ..errors import AnswerParseError, BackendError
from ..imaging import PromptImage
from ..prompting import PromptContext, VlmAnswer, parse_answer

logger = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 2


@dataclass(frozen=True)
class QueryRequest:
    """Everything a backend may need to answer one boundary query.

    ``index_to_time``, ``ctx``, ``call_key`` and ``iteration`` are metadata
    consumed only by simulated backends; network backends see the text and
    images alone. For stacked prompts, images arrive in badge order.
    """

    prompt_text: str
    images: tuple
    n_badges: int
    index_to_time: dict[int, float] = field(default_factory=dict)
    ctx: PromptContext | None = None
    call_key: str = ""
    iteration: int = 1


class VlmBackend(Protocol):
    def complete(self, request: QueryRequest) -> str:
        """Return raw reply text; raise BackendError on transport failure."""
        ...


def query(
    backend: VlmBackend,
    prompt_image: PromptImage,
    prompt_text: str,
    ctx: PromptContext,
    *,
    max_retries: int = DEFAULT_MAX_RETRIES,
    fallback_to_center: bool = True,
    call_key: str = "",
    iteration: int = 1,
) -> VlmAnswer:
    """Send one query, retrying on parse or transport errors.

    After ``max_retries`` additional attempts the center badge index
    ceil(N/2) is returned with a warning, unless fallback is disabled, in
    which case a :class:`BackendError` carrying the last transcript is
    raised. The returned index is always within [1, N] or None.
    """
    if prompt_image.n_badges < 1:
        raise BackendError("prompt image carries no badges")
    request = QueryRequest(
        prompt_text=prompt_text,
        images=tuple(prompt_image.images),
        n_badges=prompt_image.n_badges,
        index_to_time=dict(prompt_image.index_to_time),
        ctx=ctx,
        call_key=call_key,
        iteration=iteration,
    )
    last_exc: Exception | None = None
    last_raw = ""
    for attempt in range(max_retries + 1):
        try:
            last_raw = backend.complete(request)
            return parse_answer(last_raw, request.n_badges, allow_none=ctx.allow_none)
        except (AnswerParseError, BackendError) as exc:
            last_exc = exc
            logger.debug("query attempt %d failed: %s", attempt + 1, exc)
    if fallback_to_center:
        center = (request.n_badges + 1) // 2
        logger.warning(
            "query failed after %d attempts (%s); falling back to center badge %d",
            max_retries + 1,
            last_exc,
            center,
        )
        return VlmAnswer(selected_index=center, raw_text=last_raw, analysis="fallback")
    raise BackendError(
        f"query failed after {max_retries + 1} attempts: {last_exc}; "
        f"last reply: {last_raw[:500]!r}"
    ) from last_exc
