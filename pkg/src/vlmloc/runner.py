"""Request handlers shared by the HTTP service and the CLI.

Handlers are pure with respect to the filesystem outputs of the caller:
they read inputs, run the pipeline, and return a response model. Writing
result files is the client's business (the sweep is the exception, since
its resume ledger belongs to wherever it executes).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .backends import (
    HttpBackendConfig,
    HttpChatBackend,
    OracleBackend,
    OracleConfig,
    RecordingBackend,
    ReplayBackend,
    VlmBackend,
)
from .errors import ConfigError
from .frames import FrameSource, open_frame_source
from .imaging import GridSpec
from .metrics import (
    ScoredSegment,
    evaluate_segmentation,
    map_at,
    uniform_baseline,
)
from .models import (
    BackendModel,
    EvaluateRequest,
    EvaluateResponse,
    LocalizeRequest,
    LocalizeResponse,
    PerClassMetrics,
    RunModel,
    ScanRequest,
    ScanResponse,
    SegmentModel,
    TraceEntryModel,
    TransitionsRequest,
    TransitionsResponse,
)
from .search import (
    SearchConfig,
    TraceEntry,
    estimate_transitions,
    localize_action,
    windowed_scan,
)
from .timelines import Segment, Timeline, parse_timeline


def make_grid(run: RunModel) -> GridSpec:
    g = run.grid
    return GridSpec(
        rows=g.rows, cols=g.cols, cell_px=g.cell_px, style=g.style, label_scale=g.label_scale
    )


def make_search_config(run: RunModel) -> SearchConfig:
    return SearchConfig(
        grid=make_grid(run),
        iterations=run.iterations,
        min_window_s=run.min_window_s,
        window_shrink=run.window_shrink,
        max_retries=run.max_retries,
        fallback_to_center=run.fallback_to_center,
        concurrency=run.concurrency,
        end_window=run.end_window,
    )


def make_backend(spec: BackendModel, seed: int) -> VlmBackend:
    if spec.kind == "oracle":
        if not spec.gt_path:
            raise ConfigError("oracle backend requires gt_path")
        gt = parse_timeline(
            spec.gt_path,
            spec.gt_format,
            fps=spec.gt_fps,
            video_id=spec.gt_video_id,
            duration_s=spec.gt_duration_s,
            zero_based=spec.gt_zero_based,
            snap_gapless=spec.gt_snap_gapless,
        )
        backend: VlmBackend = OracleBackend(
            OracleConfig(ground_truth=gt, noise_rate=spec.noise_rate, rng_seed=seed)
        )
    elif spec.kind == "replay":
        if not spec.transcript_path:
            raise ConfigError("replay backend requires transcript_path")
        backend = ReplayBackend(spec.transcript_path)
    elif spec.kind == "openai_http":
        backend = HttpChatBackend(
            HttpBackendConfig(
                endpoint=spec.endpoint,
                model=spec.model,
                api_key_env=spec.api_key_env,
                timeout_s=spec.timeout_s,
                jpeg_quality=spec.jpeg_quality,
                max_concurrency=spec.max_concurrency,
                requests_per_minute=spec.requests_per_minute,
            )
        )
    else:  # pragma: no cover - pydantic rejects other literals
        raise ConfigError(f"unknown backend kind {spec.kind!r}")
    if spec.record_path:
        backend = RecordingBackend(backend, spec.record_path)
    return backend


def input_hash(source: FrameSource, extra: dict) -> str:
    """Manifest hash over frame filenames/sizes plus request inputs.

    Cheap and deterministic; content-level hashing of every frame would
    dominate runtime on real videos.
    """
    h = hashlib.sha256()
    h.update(json.dumps(extra, sort_keys=True).encode())
    for p in sorted(source.root.iterdir()):
        if p.is_file():
            h.update(p.name.encode())
            h.update(str(p.stat().st_size).encode())
    return h.hexdigest()


def _segment_models(segments: list[Segment]) -> list[SegmentModel]:
    return [SegmentModel(label=s.label, start=s.start_s, end=s.end_s) for s in segments]


def _trace_models(trace: list[TraceEntry]) -> list[TraceEntryModel]:
    return [
        TraceEntryModel(
            task=t.task,
            boundary=t.boundary,
            iteration=t.iteration,
            window_center=t.window_center,
            window_width=t.window_width,
            selected_index=t.selected_index,
            selected_time=t.selected_time,
        )
        for t in trace
    ]


def run_localize(req: LocalizeRequest) -> LocalizeResponse:
    source = open_frame_source(req.frames_dir, req.fps, req.pattern)
    config = make_search_config(req.run)
    backend = make_backend(req.run.backend, req.run.seed)
    trace: list[TraceEntry] = []
    segment = localize_action(source, req.query, config, backend, trace=trace)
    return LocalizeResponse(
        video=req.frames_dir,
        config_echo=req.run.echo(),
        input_hash=input_hash(source, {"query": req.query, "fps": req.fps}),
        segments=_segment_models([segment]),
        per_iteration_trace=_trace_models(trace),
    )


def run_transitions(req: TransitionsRequest) -> TransitionsResponse:
    source = open_frame_source(req.frames_dir, req.fps, req.pattern)
    config = make_search_config(req.run)
    backend = make_backend(req.run.backend, req.run.seed)
    trace: list[TraceEntry] = []
    result = estimate_transitions(source, list(req.labels), config, backend, trace=trace)
    return TransitionsResponse(
        video=req.frames_dir,
        config_echo=req.run.echo(),
        input_hash=input_hash(source, {"labels": list(req.labels), "fps": req.fps}),
        transitions=result.transitions,
        per_task_start=result.per_task_start,
        per_task_end=result.per_task_end,
        monotonicity_violations=result.monotonicity_violations,
        segments=_segment_models(result.timeline.segments),
        per_iteration_trace=_trace_models(trace),
    )


def run_scan(req: ScanRequest) -> ScanResponse:
    source = open_frame_source(req.frames_dir, req.fps, req.pattern)
    config = make_search_config(req.run)
    backend = make_backend(req.run.backend, req.run.seed)
    trace: list[TraceEntry] = []
    segments = windowed_scan(
        source, req.query, config, backend, scan_window_s=req.run.scan_window_s, trace=trace
    )
    return ScanResponse(
        video=req.frames_dir,
        config_echo=req.run.echo(),
        input_hash=input_hash(source, {"query": req.query, "fps": req.fps}),
        segments=_segment_models(segments),
        per_iteration_trace=_trace_models(trace),
    )


def _load_prediction_segments(path: str) -> tuple[Timeline, list[ScoredSegment]]:
    # Accepts either the bare timeline schema or a localization output
    # document; both carry a "segments" list. Scores default to 1.0.
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read predictions from {path}: {exc}") from exc
    if not isinstance(doc, dict) or "segments" not in doc:
        raise ConfigError(f"{path}: expected an object with a 'segments' list")
    try:
        scored = [
            ScoredSegment(
                str(s["label"]), float(s["start"]), float(s["end"]), float(s.get("score", 1.0))
            )
            for s in doc["segments"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed prediction segment: {exc}") from exc
    segs = sorted(
        (Segment(s.label, s.start_s, s.end_s) for s in scored),
        key=lambda s: (s.start_s, s.end_s),
    )
    duration = float(doc.get("duration", max((s.end_s for s in segs), default=0.0)))
    return Timeline(duration_s=duration, segments=segs), scored


def run_evaluate(req: EvaluateRequest) -> EvaluateResponse:
    if not req.gt_path:
        raise ConfigError("evaluate requires gt_path")
    gt = parse_timeline(
        req.gt_path,
        req.gt_format,
        fps=req.fps if req.gt_format == "breakfast_txt" else None,
        video_id=req.video_id,
        duration_s=req.duration_s,
        zero_based=req.zero_based,
        snap_gapless=req.snap_gapless,
    )
    if req.uniform_baseline:
        pred = uniform_baseline(gt.labels(), gt.duration_s)
        scored = [
            ScoredSegment(s.label, s.start_s, s.end_s, 1.0) for s in pred.segments
        ]
    else:
        if not req.pred_path:
            raise ConfigError("evaluate requires pred_path (or uniform_baseline)")
        pred, scored = _load_prediction_segments(req.pred_path)

    if req.mode == "segmentation":
        report = evaluate_segmentation(pred, gt, req.fps)
        return EvaluateResponse(
            mode="segmentation",
            mof=report.mof,
            mean_iou=report.mean_iou,
            f1=report.f1,
            per_class={k: PerClassMetrics(**v) for k, v in report.per_class.items()},
        )
    report = map_at(scored, gt.segments, tuple(req.thresholds))
    return EvaluateResponse(
        mode="detection",
        thresholds=list(report.thresholds),
        ap_at={f"{t:g}": v for t, v in report.ap_at.items()},
        avg_map=report.avg_map,
    )


def canonical_json(model) -> str:
    """Deterministic serialization for output files and byte-level diffs."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
