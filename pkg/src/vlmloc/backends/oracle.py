"""Deterministic simulated backend answering from ground truth.

Stands in for a hosted model in offline tests: it reads the true boundary
from an annotation timeline, optionally corrupts the answer with seeded
noise, and replies with the same transcript format a real model is asked
for, so the full parse path is exercised.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from ..errors import OracleError
from ..prompting import PromptContext
from ..timelines import Segment, Timeline
from .base import QueryRequest


@dataclass(frozen=True)
class OracleConfig:
    ground_truth: Timeline
    noise_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_rate <= 1.0:
            raise OracleError(f"noise_rate must be in [0, 1], got {self.noise_rate}")


def nearest_badge(index_to_time: dict[int, float], t_star: float) -> int:
    """Badge whose timestamp is nearest to t_star; ties go to the lower index."""
    return min(sorted(index_to_time), key=lambda k: (abs(index_to_time[k] - t_star), k))


class OracleBackend:
    def __init__(self, config: OracleConfig):
        self.config = config

    def _rng(self, call_key: str, iteration: int) -> random.Random:
        # Per-call stream derived from stable material, so concurrent
        # searches cannot perturb each other's draws.
        material = f"{self.config.rng_seed}|{call_key}|{iteration}".encode()
        seed = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
        return random.Random(seed)

    def _target(self, ctx: PromptContext, span: tuple[float, float]) -> Segment | None:
        occurrences = [s for s in self.config.ground_truth.segments if s.label == ctx.focus_label]
        if not occurrences:
            raise OracleError(f"label {ctx.focus_label!r} absent from ground truth")
        if ctx.allow_none:
            # Scan mode: the relevant occurrence is whichever overlaps the
            # sampled span; None when the action is absent from it.
            lo, hi = span
            overlapping = [
                (min(s.end_s, hi) - max(s.start_s, lo), s.start_s, s)
                for s in occurrences
                if min(s.end_s, hi) - max(s.start_s, lo) > 0
            ]
            if not overlapping:
                return None
            overlapping.sort(key=lambda t: (-t[0], t[1]))
            return overlapping[0][2]
        # Ordered-task mode: the k-th appearance of the label in the task
        # sequence maps to the k-th ground-truth segment with that label.
        ordinal = ctx.task_sequence[: ctx.focus_index].count(ctx.focus_label)
        if ordinal > len(occurrences):
            raise OracleError(
                f"ground truth has {len(occurrences)} occurrence(s) of "
                f"{ctx.focus_label!r}, needed {ordinal}"
            )
        return occurrences[ordinal - 1]

    def complete(self, request: QueryRequest) -> str:
        ctx = request.ctx
        if ctx is None:
            raise OracleError("oracle backend needs the prompt context")
        if not request.index_to_time:
            raise OracleError("oracle backend needs badge timestamps")
        times = request.index_to_time
        span = (min(times.values()), max(times.values()))
        target = self._target(ctx, span)
        if target is None:
            return 'The action is not visible in any of these frames. {"points": []}'
        t_star = target.start_s if ctx.boundary == "start" else target.end_s
        rng = self._rng(request.call_key, request.iteration)
        if self.config.noise_rate > 0 and rng.random() < self.config.noise_rate:
            k = rng.randint(1, request.n_badges)
        else:
            k = nearest_badge(times, t_star)
        return (
            f"Badge {k} sits closest to the queried moment of ({ctx.focus_text}). "
            f'{{"points": [{k}]}}'
        )
