"""Prompt construction and reply parsing for boundary-selection queries.

The prompt names every task in order and singles out the one being searched,
so that parallel searches over the same video know which occurrence of a
repeated task they are targeting.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .errors import (
    ConfigError,
    EmptyPointsNotAllowed,
    NoJsonFound,
    PointsNotInteger,
    PointsOutOfRange,
)

logger = logging.getLogger(__name__)

_TEMPLATE = (
    "I will show an image sequence of human operation. "
    "It contains the following tasks: {task_sequence}. "
    "I have annotated the images with numbered circles. "
    "Choose the number that is closest to the moment when the ({task_focus}) has {verb}. "
    "You are a five-time world champion in this game. "
    "Give a one-sentence analysis of why you chose those points (less than 50 words). "
    'Provide your answer at the end in a JSON file in this format: {{"points": []}}.'
)

_NONE_SENTENCE = (
    ' If the ({task_focus}) does not appear in any of the images, '
    'provide an empty list: {{"points": []}}.'
)

BOUNDARIES = ("start", "end")


@dataclass(frozen=True)
class PromptContext:
    """Which task in an ordered sequence is searched, and for which boundary."""

    task_sequence: tuple[str, ...]
    focus_index: int  # 1-based position within task_sequence
    boundary: str = "start"
    allow_none: bool = False

    def __post_init__(self) -> None:
        if not self.task_sequence:
            raise ConfigError("task_sequence must not be empty")
        if not 1 <= self.focus_index <= len(self.task_sequence):
            raise ConfigError(
                f"focus_index {self.focus_index} outside 1..{len(self.task_sequence)}"
            )
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def focus_label(self) -> str:
        return self.task_sequence[self.focus_index - 1]

    @property
    def focus_text(self) -> str:
        return f"{self.focus_index}. {self.focus_label}"


def make_context(
    tasks: list[str] | tuple[str, ...],
    focus_index: int,
    boundary: str = "start",
    allow_none: bool = False,
) -> PromptContext:
    return PromptContext(tuple(tasks), focus_index, boundary, allow_none)


@dataclass(frozen=True)
class VlmAnswer:
    selected_index: int | None  # None means "action absent" in allow_none mode
    raw_text: str
    analysis: str = ""


def build_prompt(ctx: PromptContext) -> str:
    """Render the query text for a context. Total over valid contexts."""
    sequence = ", ".join(f"{i}. {label}" for i, label in enumerate(ctx.task_sequence, start=1))
    verb = "started" if ctx.boundary == "start" else "ended"
    text = _TEMPLATE.format(task_sequence=sequence, task_focus=ctx.focus_text, verb=verb)
    if ctx.allow_none:
        text += _NONE_SENTENCE.format(task_focus=ctx.focus_text)
    return text


def _points_objects(raw_text: str):
    # Yield (start_offset, parsed_object) for every top-level well-formed
    # JSON object in the text that carries a "points" key. Surrounding
    # prose, code fences and stray braces are skipped over.
    decoder = json.JSONDecoder()
    pos = raw_text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw_text, pos)
        except ValueError:
            obj = None
        if isinstance(obj, dict) and "points" in obj:
            yield pos, obj
        pos = raw_text.find("{", pos + 1)


def parse_answer(raw_text: str, n_badges: int, allow_none: bool = False) -> VlmAnswer:
    """Extract the selected badge index from a model reply.

    The last well-formed JSON object containing a "points" key wins. An
    empty list maps to an absent action only when ``allow_none``; every
    failure mode raises a distinct exception class so the retry policy can
    discriminate.
    """
    if n_badges < 1:
        raise ConfigError(f"n_badges must be >= 1, got {n_badges}")
    found = None
    for pos, obj in _points_objects(raw_text):
        found = (pos, obj)
    if found is None:
        raise NoJsonFound(f"no JSON found with a 'points' key in reply: {raw_text[:200]!r}")
    pos, obj = found
    analysis = raw_text[:pos].strip()

    points = obj["points"]
    if not isinstance(points, list):
        raise PointsNotInteger(f"'points' must be a list, got {type(points).__name__}")
    if len(points) == 0:
        if allow_none:
            return VlmAnswer(selected_index=None, raw_text=raw_text, analysis=analysis)
        raise EmptyPointsNotAllowed("empty 'points' returned but absence is not permitted")
    first = points[0]
    if isinstance(first, bool) or not isinstance(first, int):
        raise PointsNotInteger(f"'points' entries must be integers, got {first!r}")
    if not 1 <= first <= n_badges:
        raise PointsOutOfRange(f"selected index {first} outside 1..{n_badges}")
    if len(points) > 1:
        logger.debug("reply selected %d points, using the first: %s", len(points), points)
    return VlmAnswer(selected_index=first, raw_text=raw_text, analysis=analysis)
