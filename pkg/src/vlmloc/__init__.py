"""Training-free, open-vocabulary video action localization.

The pipeline samples frames from a shrinking time window, composites them
into a badge-annotated image, asks a vision-language model which badge sits
nearest an action boundary, and re-centers on the answer. A deterministic
simulated backend makes the whole pipeline testable offline.
"""

__version__ = "0.1.0"

from .errors import (
    AnswerParseError,
    BackendError,
    ComposeError,
    ConfigError,
    EvalError,
    FrameIOError,
    OracleError,
    TimelineError,
    VlmlocError,
)
from .frames import DEFAULT_PATTERN, FrameSource, extract_frames, open_frame_source
from .imaging import GridSpec, PromptImage, SampledFrame, TimeWindow, compose, sample_frames
from .metrics import (
    DEFAULT_MAP_THRESHOLDS,
    EvalReport,
    MapReport,
    ScoredSegment,
    evaluate_segmentation,
    frame_f1,
    iou_per_class,
    map_at,
    mof,
    uniform_baseline,
)
from .prompting import PromptContext, VlmAnswer, build_prompt, make_context, parse_answer
from .search import (
    SearchConfig,
    TraceEntry,
    TransitionResult,
    clamp_forward_ends,
    clamp_forward_starts,
    estimate_transitions,
    full_window,
    localize_action,
    localize_boundary,
    transitions_from_estimates,
    windowed_scan,
)
from .timelines import Segment, Timeline, parse_timeline, save_timeline

__all__ = [
    "__version__",
    "AnswerParseError",
    "BackendError",
    "ComposeError",
    "ConfigError",
    "EvalError",
    "FrameIOError",
    "OracleError",
    "TimelineError",
    "VlmlocError",
    "DEFAULT_PATTERN",
    "FrameSource",
    "extract_frames",
    "open_frame_source",
    "GridSpec",
    "PromptImage",
    "SampledFrame",
    "TimeWindow",
    "compose",
    "sample_frames",
    "DEFAULT_MAP_THRESHOLDS",
    "EvalReport",
    "MapReport",
    "ScoredSegment",
    "evaluate_segmentation",
    "frame_f1",
    "iou_per_class",
    "map_at",
    "mof",
    "uniform_baseline",
    "PromptContext",
    "VlmAnswer",
    "build_prompt",
    "make_context",
    "parse_answer",
    "SearchConfig",
    "TraceEntry",
    "TransitionResult",
    "clamp_forward_ends",
    "clamp_forward_starts",
    "estimate_transitions",
    "full_window",
    "localize_action",
    "localize_boundary",
    "transitions_from_estimates",
    "windowed_scan",
    "Segment",
    "Timeline",
    "parse_timeline",
    "save_timeline",
]
