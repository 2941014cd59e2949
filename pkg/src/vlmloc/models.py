"""Pydantic request/response models: the service wire contract.

The CLI builds these same models and either executes them in-process or
posts them to a running service, so there is exactly one schema for both
paths. ``config_echo`` in responses carries the run configuration minus
execution-only knobs (concurrency), keeping outputs byte-identical across
worker counts.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from .frames import DEFAULT_PATTERN
from .metrics import DEFAULT_MAP_THRESHOLDS

Style = Literal["tiled_corner", "tiled_center", "tiled_spacing", "stacked"]
TimelineFormat = Literal["json", "breakfast_txt", "thumos_csv"]


class GridModel(BaseModel):
    rows: int = 5
    cols: int = 5
    cell_px: int = 256
    style: Style = "tiled_corner"
    label_scale: float = 0.18


class BackendModel(BaseModel):
    kind: Literal["oracle", "openai_http", "replay"] = "oracle"
    # openai_http
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_concurrency: int = 4
    requests_per_minute: int | None = None
    jpeg_quality: int = 90
    # oracle
    gt_path: str | None = None
    gt_format: TimelineFormat = "json"
    gt_fps: float | None = None
    gt_video_id: str | None = None
    gt_duration_s: float | None = None
    gt_zero_based: bool = False
    gt_snap_gapless: bool = False
    noise_rate: float = 0.0
    # replay
    transcript_path: str | None = None
    # transcript capture, applicable to any kind
    record_path: str | None = None


class RunModel(BaseModel):
    """Run configuration echoed into every output document."""

    backend: BackendModel = Field(default_factory=BackendModel)
    grid: GridModel = Field(default_factory=GridModel)
    iterations: int = 4
    window_shrink: float = 0.5
    min_window_s: float | None = None
    scan_window_s: float = 5.0
    concurrency: int = 4
    seed: int = 0
    max_retries: int = 2
    fallback_to_center: bool = True
    end_window: Literal["full", "after_start"] = "full"

    def echo(self) -> dict:
        # worker counts affect scheduling only, never results
        return self.model_dump(
            mode="json", exclude={"concurrency": True, "backend": {"max_concurrency"}}
        )


class LocalizeRequest(BaseModel):
    frames_dir: str
    fps: float
    pattern: str = DEFAULT_PATTERN
    query: str
    run: RunModel = Field(default_factory=RunModel)


class TransitionsRequest(BaseModel):
    frames_dir: str
    fps: float
    pattern: str = DEFAULT_PATTERN
    labels: list[str]
    run: RunModel = Field(default_factory=RunModel)


class ScanRequest(BaseModel):
    frames_dir: str
    fps: float
    pattern: str = DEFAULT_PATTERN
    query: str
    run: RunModel = Field(default_factory=RunModel)


class EvaluateRequest(BaseModel):
    mode: Literal["segmentation", "detection"] = "segmentation"
    pred_path: str | None = None
    gt_path: str = ""
    gt_format: TimelineFormat = "json"
    fps: float = 15.0
    video_id: str | None = None
    duration_s: float | None = None
    zero_based: bool = False
    snap_gapless: bool = False
    thresholds: list[float] = Field(default_factory=lambda: list(DEFAULT_MAP_THRESHOLDS))
    uniform_baseline: bool = False
    video_label: str = ""


class SweepRequest(BaseModel):
    videos_path: str
    out_dir: str
    grids: list[str] = Field(default_factory=lambda: ["5x5"])
    iterations: list[int] = Field(default_factory=lambda: [4])
    styles: list[Style] = Field(default_factory=lambda: ["tiled_corner"])
    noise_rates: list[float] = Field(default_factory=lambda: [0.0])
    run: RunModel = Field(default_factory=RunModel)


class SegmentModel(BaseModel):
    label: str
    start: float
    end: float


class TraceEntryModel(BaseModel):
    task: str
    boundary: str
    iteration: int
    window_center: float
    window_width: float
    selected_index: int | None
    selected_time: float | None


class LocalizeResponse(BaseModel):
    video: str
    config_echo: dict
    input_hash: str
    segments: list[SegmentModel]
    per_iteration_trace: list[TraceEntryModel]


class TransitionsResponse(BaseModel):
    video: str
    config_echo: dict
    input_hash: str
    transitions: list[float]
    per_task_start: list[float]
    per_task_end: list[float]
    monotonicity_violations: list[dict]
    segments: list[SegmentModel]
    per_iteration_trace: list[TraceEntryModel]


class ScanResponse(BaseModel):
    video: str
    config_echo: dict
    input_hash: str
    segments: list[SegmentModel]
    per_iteration_trace: list[TraceEntryModel]


class PerClassMetrics(BaseModel):
    iou: float
    precision: float
    recall: float
    f1: float


class EvaluateResponse(BaseModel):
    mode: Literal["segmentation", "detection"]
    mof: float | None = None
    mean_iou: float | None = None
    f1: float | None = None
    per_class: dict[str, PerClassMetrics] | None = None
    thresholds: list[float] | None = None
    ap_at: dict[str, float] | None = None
    avg_map: float | None = None


class SweepRow(BaseModel):
    cell_id: str
    grid: str
    iterations: int
    style: str
    noise_rate: float
    n_videos: int
    mof: float | None = None
    mean_iou: float | None = None
    f1: float | None = None
    error: str = ""


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    csv_path: str
    completed: int
    skipped: int
