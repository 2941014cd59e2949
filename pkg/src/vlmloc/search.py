"""Iterative boundary search, action localization, transition estimation,
and windowed scanning over long videos.

The core loop asks a backend to pick the numbered frame nearest an action
boundary, re-centers the sampling window on the chosen timestamp, shrinks
the window, and repeats. With a shrink factor s, an n-badge grid, K
iterations and an initial window w0, the final answer for a truthful
backend lies within w0 * s^(K-1) / (n-1) of the true boundary (plus half a
frame interval of slack for frame quantization).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backends.base import VlmBackend, query
from .errors import ConfigError
from .frames import FrameSource
from .imaging import GridSpec, TimeWindow, compose, sample_frames
from .prompting import PromptContext, build_prompt, make_context
from .timelines import Segment, Timeline


@dataclass(frozen=True)
class SearchConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    iterations: int = 4
    min_window_s: float | None = None  # None resolves to 4 frame intervals
    window_shrink: float = 0.5
    max_retries: int = 2
    fallback_to_center: bool = True
    concurrency: int = 4
    end_window: str = "full"  # "full" or "after_start" for end-time searches

    def __post_init__(self) -> None:
        if not 1 <= self.iterations <= 12:
            raise ConfigError(f"iterations must be in 1..12, got {self.iterations}")
        if not 0.0 < self.window_shrink < 1.0:
            raise ConfigError(f"window_shrink must be in (0, 1), got {self.window_shrink}")
        if self.min_window_s is not None and self.min_window_s < 0:
            raise ConfigError(f"min_window_s must be >= 0, got {self.min_window_s}")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be >= 1, got {self.concurrency}")
        if self.end_window not in ("full", "after_start"):
            raise ConfigError("end_window must be 'full' or 'after_start'")

    def resolved_min_window(self, source: FrameSource) -> float:
        # Refining below a few frame intervals cannot move the answer.
        return self.min_window_s if self.min_window_s is not None else 4.0 / source.fps


@dataclass(frozen=True)
class TraceEntry:
    task: str
    boundary: str
    iteration: int
    window_center: float
    window_width: float
    selected_index: int | None
    selected_time: float | None


@dataclass(frozen=True)
class TransitionResult:
    transitions: list[float]  # length N-1, boundary between task i and i+1
    per_task_start: list[float]
    per_task_end: list[float]
    timeline: Timeline
    monotonicity_violations: list[dict]


def full_window(source: FrameSource) -> TimeWindow:
    return TimeWindow(center_s=source.duration_s / 2, width_s=source.duration_s)


def localize_boundary(
    source: FrameSource,
    ctx: PromptContext,
    config: SearchConfig,
    backend: VlmBackend,
    initial_window: TimeWindow,
    *,
    trace: list[TraceEntry] | None = None,
    call_key: str = "",
    detect: bool = False,
) -> float | None:
    """Run the iterative narrowing search for one boundary.

    Returns the final window center. With ``detect`` set (windowed-scan
    mode) an absent-action reply on the *first* iteration returns None;
    absent-action replies on later iterations never retract a detection
    and simply leave the center where it is.
    """
    duration = source.duration_s
    n = config.grid.n
    min_w = config.resolved_min_window(source)
    prompt_text = build_prompt(ctx)
    center = initial_window.center_s
    width = initial_window.width_s

    for i in range(1, config.iterations + 1):
        window = TimeWindow(center_s=center, width_s=width)
        a, b = window.clamped(duration)
        if i > 1 and (b - a) / (n - 1) < 1.0 / source.fps:
            break  # per-badge interval below frame resolution
        frames = sample_frames(source, window, n)
        prompt_image = compose(frames, config.grid)
        answer = query(
            backend,
            prompt_image,
            prompt_text,
            ctx,
            max_retries=config.max_retries,
            fallback_to_center=config.fallback_to_center,
            call_key=call_key,
            iteration=i,
        )
        selected_time = None
        if answer.selected_index is not None:
            selected_time = prompt_image.index_to_time[answer.selected_index]
        if trace is not None:
            trace.append(
                TraceEntry(
                    task=ctx.focus_text,
                    boundary=ctx.boundary,
                    iteration=i,
                    window_center=center,
                    window_width=width,
                    selected_index=answer.selected_index,
                    selected_time=selected_time,
                )
            )
        if answer.selected_index is None:
            if i == 1 and detect:
                return None
        else:
            center = selected_time
        width = max(width * config.window_shrink, min_w)
    return center


def localize_action(
    source: FrameSource,
    label: str,
    config: SearchConfig,
    backend: VlmBackend,
    *,
    span: tuple[float, float] | None = None,
    allow_none: bool = False,
    detect: bool = False,
    trace: list[TraceEntry] | None = None,
    call_key_prefix: str = "",
) -> Segment | None:
    """Find one occurrence of ``label``: start search, then end search over
    the remaining span. Returns None only in detect mode when the action is
    judged absent. The end never precedes the start (clamped)."""
    if not label:
        raise ConfigError("query label must not be empty")
    lo, hi = span if span is not None else (0.0, source.duration_s)
    if hi <= lo:
        raise ConfigError(f"empty search span [{lo}, {hi}]")

    start_ctx = make_context([label], 1, "start", allow_none)
    start = localize_boundary(
        source,
        start_ctx,
        config,
        backend,
        TimeWindow((lo + hi) / 2, hi - lo),
        trace=trace,
        call_key=f"{call_key_prefix}1.{label}|start",
        detect=detect,
    )
    if start is None:
        return None

    end_ctx = make_context([label], 1, "end", allow_none)
    if hi - start > 0:
        end = localize_boundary(
            source,
            end_ctx,
            config,
            backend,
            TimeWindow((start + hi) / 2, hi - start),
            trace=trace,
            call_key=f"{call_key_prefix}1.{label}|end",
        )
    else:
        end = start
    if end < start:
        end = start
    return Segment(label, start, end)


def clamp_forward_starts(starts: list[float]) -> list[float]:
    """Forward pass making start times non-decreasing (later pulled up)."""
    out = list(starts)
    for i in range(len(out) - 1):
        if out[i + 1] < out[i]:
            out[i + 1] = out[i]
    return out


def clamp_forward_ends(ends: list[float]) -> tuple[list[float], list[dict]]:
    """Forward pass pulling each end down to its successor.

    A single literal pass: clamping i against an i+1 that is itself lowered
    later can leave ends non-monotone. Residual inversions are reported,
    never silently repaired.
    """
    out = list(ends)
    for i in range(len(out) - 1):
        if out[i] > out[i + 1]:
            out[i] = out[i + 1]
    violations = []
    for i in range(len(out) - 1):
        if out[i] > out[i + 1]:
            violations.append(
                {"kind": "end_order", "index": i + 1, "value": out[i], "next": out[i + 1]}
            )
    return out, violations


def transitions_from_estimates(
    starts: list[float],
    ends: list[float],
    task_labels: list[str],
    duration_s: float,
) -> TransitionResult:
    """Combine raw per-task boundary estimates into a gapless timeline.

    Applies both forward clamps, takes each transition as the midpoint of
    the current task's end and the next task's start, and pins the outer
    timeline boundaries to 0 and the duration.
    """
    n_tasks = len(task_labels)
    if not (len(starts) == len(ends) == n_tasks):
        raise ConfigError("starts/ends must match the number of task labels")
    starts = clamp_forward_starts(starts)
    ends, violations = clamp_forward_ends(ends)
    transitions = [(ends[i] + starts[i + 1]) / 2 for i in range(n_tasks - 1)]
    for i in range(len(transitions) - 1):
        if transitions[i] > transitions[i + 1]:
            violations.append(
                {
                    "kind": "transition_order",
                    "index": i + 1,
                    "value": transitions[i],
                    "next": transitions[i + 1],
                }
            )

    # The emitted timeline must partition [0, duration]; running-max keeps
    # it valid even when literal clamping left an inversion (reported above).
    bounds = [0.0]
    for t in transitions:
        bounds.append(min(max(t, bounds[-1]), duration_s))
    bounds.append(duration_s)
    segments = [Segment(task_labels[i], bounds[i], bounds[i + 1]) for i in range(n_tasks)]
    timeline = Timeline(duration_s=duration_s, segments=segments)
    timeline.validate(gapless=True)
    return TransitionResult(
        transitions=transitions,
        per_task_start=starts,
        per_task_end=ends,
        timeline=timeline,
        monotonicity_violations=violations,
    )


def estimate_transitions(
    source: FrameSource,
    task_labels: list[str],
    config: SearchConfig,
    backend: VlmBackend,
    *,
    trace: list[TraceEntry] | None = None,
) -> TransitionResult:
    """Estimate the boundary times of an ordered, gapless task sequence.

    All start times are searched concurrently, then forward-clamped to be
    non-decreasing; end times likewise. Each transition is the midpoint of
    the current task's end and the next task's start; the first and last
    timeline boundaries are pinned to 0 and the video duration.
    """
    n_tasks = len(task_labels)
    if n_tasks < 2:
        raise ConfigError(f"need at least 2 task labels, got {n_tasks}")
    duration = source.duration_s

    def run_one(idx: int, boundary: str) -> tuple[float, list[TraceEntry]]:
        local_trace: list[TraceEntry] = []
        ctx = make_context(task_labels, idx, boundary)
        if boundary == "end" and config.end_window == "after_start":
            lo = min(starts[idx - 1], duration - 1e-9)
            window = TimeWindow((lo + duration) / 2, max(duration - lo, 1e-9))
        else:
            window = full_window(source)
        t = localize_boundary(
            source,
            ctx,
            config,
            backend,
            window,
            trace=local_trace,
            call_key=f"{idx}.{task_labels[idx - 1]}|{boundary}",
        )
        return t, local_trace

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        start_results = list(pool.map(lambda i: run_one(i, "start"), range(1, n_tasks + 1)))
    starts = clamp_forward_starts([t for t, _ in start_results])

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        end_results = list(pool.map(lambda i: run_one(i, "end"), range(1, n_tasks + 1)))

    if trace is not None:
        for _, entries in (*start_results, *end_results):
            trace.extend(entries)

    return transitions_from_estimates(
        [t for t, _ in start_results],
        [t for t, _ in end_results],
        task_labels,
        duration,
    )


def windowed_scan(
    source: FrameSource,
    label: str,
    config: SearchConfig,
    backend: VlmBackend,
    scan_window_s: float = 5.0,
    *,
    trace: list[TraceEntry] | None = None,
) -> list[Segment]:
    """Scan a long video in fixed intervals, localizing each detected
    occurrence of ``label``.

    Absence is decided by the first reply in each interval. After a
    detection the cursor jumps to the localized end time; a detection that
    fails to advance the cursor moves it by one badge interval instead, so
    the scan always terminates.
    """
    if scan_window_s <= 0:
        raise ConfigError(f"scan_window_s must be positive, got {scan_window_s}")
    duration = source.duration_s
    n = config.grid.n
    cursor = 0.0
    found: list[Segment] = []
    while cursor < duration - 1e-9:
        hi = min(cursor + scan_window_s, duration)
        seg = localize_action(
            source,
            label,
            config,
            backend,
            span=(cursor, hi),
            allow_none=True,
            detect=True,
            trace=trace,
            call_key_prefix=f"scan@{cursor:.6f}|",
        )
        if seg is None:
            cursor = cursor + scan_window_s
            continue
        if seg.end_s > duration:
            seg = Segment(seg.label, seg.start_s, duration)
        found.append(seg)
        badge_interval = (hi - cursor) / (n - 1)
        cursor = seg.end_s if seg.end_s > cursor + 1e-9 else cursor + badge_interval
    return found
