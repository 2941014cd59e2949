"""Command-line client for the localization pipeline.

Every subcommand marshals its arguments into the service request models
and either executes them in-process (the default; oracle and replay runs
need no server) or posts them to a running service via ``--server``.

Exit codes: 0 success, 2 configuration error, 3 backend failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .errors import (
    BackendError,
    ConfigError,
    EvalError,
    FrameIOError,
    OracleError,
    TimelineError,
    VlmlocError,
)
from .frames import DEFAULT_PATTERN, extract_frames
from .models import (
    BackendModel,
    EvaluateRequest,
    EvaluateResponse,
    GridModel,
    LocalizeRequest,
    LocalizeResponse,
    RunModel,
    ScanRequest,
    ScanResponse,
    SweepRequest,
    SweepResponse,
    TransitionsRequest,
    TransitionsResponse,
)
from .runner import canonical_json, run_evaluate, run_localize, run_scan, run_transitions
from .sweep import parse_grid, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_IO = 4

_ROUTES = {
    "/localize": (run_localize, LocalizeResponse),
    "/transitions": (run_transitions, TransitionsResponse),
    "/scan": (run_scan, ScanResponse),
    "/evaluate": (run_evaluate, EvaluateResponse),
    "/sweep": (run_sweep, SweepResponse),
}


def _execute(server: str | None, route: str, request):
    handler, response_type = _ROUTES[route]
    if not server:
        return handler(request)
    resp = httpx.post(
        server.rstrip("/") + route, json=request.model_dump(mode="json"), timeout=None
    )
    resp.raise_for_status()
    return response_type.model_validate(resp.json())


def _emit(response, out: str | None) -> None:
    text = canonical_json(response)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=["oracle", "openai_http", "replay"], default="oracle")
    g.add_argument("--gt", help="ground-truth path (oracle backend)")
    g.add_argument("--gt-format", choices=["json", "breakfast_txt", "thumos_csv"], default="json")
    g.add_argument("--gt-fps", type=float, help="fps for frame-indexed ground truth")
    g.add_argument("--gt-video-id", help="row filter for thumos_csv ground truth")
    g.add_argument("--gt-zero-based", action="store_true",
                   help="ground-truth frame indices count from 0")
    g.add_argument("--gt-snap-gapless", action="store_true",
                   help="close sub-frame gaps in parsed ground truth")
    g.add_argument("--noise", type=float, default=0.0, help="oracle noise rate in [0,1]")
    g.add_argument("--endpoint", default="https://api.openai.com/v1/chat/completions")
    g.add_argument("--model", default="gpt-4o")
    g.add_argument("--api-key-env", default="OPENAI_API_KEY")
    g.add_argument("--timeout", type=float, default=60.0)
    g.add_argument("--rpm", type=int, help="request-per-minute budget")
    g.add_argument("--transcript", help="replay transcript path (replay backend)")
    g.add_argument("--record", help="append request/response transcript to this file")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--grid", default="5x5", help="rows x cols, e.g. 5x5")
    g.add_argument(
        "--style",
        choices=["tiled_corner", "tiled_center", "tiled_spacing", "stacked"],
        default="tiled_corner",
    )
    g.add_argument("--cell-px", type=int, default=256)
    g.add_argument("--iters", type=int, default=4)
    g.add_argument("--shrink", type=float, default=0.5)
    g.add_argument("--min-window", type=float, default=None)
    g.add_argument("--scan-window", type=float, default=5.0)
    g.add_argument("--retries", type=int, default=2)
    g.add_argument("--no-fallback", action="store_true", help="hard-fail instead of center fallback")
    g.add_argument("--concurrency", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--end-window", choices=["full", "after_start"], default="full")


def _add_io_args(p: argparse.ArgumentParser, frames: bool = True) -> None:
    if frames:
        p.add_argument("--frames", required=True, help="directory of extracted frames")
        p.add_argument("--fps", type=float, required=True)
        p.add_argument("--pattern", default=DEFAULT_PATTERN)
    p.add_argument("--out", help="write the result JSON here (default: stdout)")
    p.add_argument("--server", help="POST to a running service instead of executing locally")


def _run_model(args: argparse.Namespace) -> RunModel:
    rows, cols = parse_grid(args.grid)
    return RunModel(
        backend=BackendModel(
            kind=args.backend,
            endpoint=args.endpoint,
            model=args.model,
            api_key_env=args.api_key_env,
            timeout_s=args.timeout,
            max_concurrency=args.concurrency,
            requests_per_minute=args.rpm,
            gt_path=args.gt,
            gt_format=args.gt_format,
            gt_fps=args.gt_fps,
            gt_video_id=args.gt_video_id,
            gt_zero_based=args.gt_zero_based,
            gt_snap_gapless=args.gt_snap_gapless,
            noise_rate=args.noise,
            transcript_path=args.transcript,
            record_path=args.record,
        ),
        grid=GridModel(rows=rows, cols=cols, cell_px=args.cell_px, style=args.style),
        iterations=args.iters,
        window_shrink=args.shrink,
        min_window_s=args.min_window,
        scan_window_s=args.scan_window,
        concurrency=args.concurrency,
        seed=args.seed,
        max_retries=args.retries,
        fallback_to_center=not args.no_fallback,
        end_window=args.end_window,
    )


def _read_labels(args: argparse.Namespace) -> list[str]:
    labels = list(args.label or [])
    if args.labels:
        text = Path(args.labels).read_text(encoding="utf-8")
        labels.extend(line.strip() for line in text.splitlines() if line.strip())
    if len(labels) < 2:
        raise ConfigError("need at least 2 ordered task labels (--labels file or repeated --label)")
    return labels


def cmd_localize(args) -> int:
    req = LocalizeRequest(
        frames_dir=args.frames, fps=args.fps, pattern=args.pattern,
        query=args.query, run=_run_model(args),
    )
    _emit(_execute(args.server, "/localize", req), args.out)
    return EXIT_OK


def cmd_transitions(args) -> int:
    req = TransitionsRequest(
        frames_dir=args.frames, fps=args.fps, pattern=args.pattern,
        labels=_read_labels(args), run=_run_model(args),
    )
    _emit(_execute(args.server, "/transitions", req), args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    req = ScanRequest(
        frames_dir=args.frames, fps=args.fps, pattern=args.pattern,
        query=args.query, run=_run_model(args),
    )
    _emit(_execute(args.server, "/scan", req), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    req = EvaluateRequest(
        mode=args.mode,
        pred_path=args.pred,
        gt_path=args.gt,
        gt_format=args.gt_format,
        fps=args.fps,
        video_id=args.video_id,
        duration_s=args.duration,
        zero_based=args.zero_based,
        snap_gapless=args.snap_gapless,
        thresholds=[float(t) for t in args.thresholds.split(",")],
        uniform_baseline=args.uniform_baseline,
        video_label=args.video_label,
    )
    resp = _execute(args.server, "/evaluate", req)
    _emit(resp, args.out)
    if args.csv:
        _write_eval_csv(resp, args.csv, args.video_label)
    return EXIT_OK


def _write_eval_csv(resp: EvaluateResponse, path: str, video_label: str) -> None:
    lines = []
    if resp.mode == "segmentation":
        lines.append("video_id,mof,mean_iou,f1")
        lines.append(f"{video_label},{resp.mof:.6f},{resp.mean_iou:.6f},{resp.f1:.6f}")
    else:
        lines.append("threshold,map")
        for t in resp.thresholds or []:
            lines.append(f"{t:g},{resp.ap_at[f'{t:g}']:.6f}")
        lines.append(f"avg,{resp.avg_map:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_sweep(args) -> int:
    req = SweepRequest(
        videos_path=args.videos,
        out_dir=args.out_dir,
        grids=args.grids.split(","),
        iterations=[int(i) for i in args.iters_list.split(",")],
        styles=args.styles.split(","),
        noise_rates=[float(r) for r in args.noise_rates.split(",")],
        run=_run_model(args),
    )
    _emit(_execute(args.server, "/sweep", req), args.out)
    return EXIT_OK


def cmd_extract_frames(args) -> int:
    extract_frames(args.video, args.out_dir, args.fps, args.pattern)
    print(f"frames written to {args.out_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlmloc",
        description="Open-vocabulary video action localization via iterative visual prompting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="find the start/end of one action")
    p.add_argument("--query", required=True, help="free-text action label")
    _add_io_args(p)
    _add_run_args(p)
    _add_backend_args(p)
    p.set_defaults(fn=cmd_localize)

    p = sub.add_parser("transitions", help="estimate boundaries of an ordered task sequence")
    p.add_argument("--labels", help="file with one ordered task label per line")
    p.add_argument("--label", action="append", help="ordered task label (repeatable)")
    _add_io_args(p)
    _add_run_args(p)
    _add_backend_args(p)
    p.set_defaults(fn=cmd_transitions)

    p = sub.add_parser("scan", help="scan a long video in fixed windows for an action")
    p.add_argument("--query", required=True)
    _add_io_args(p)
    _add_run_args(p)
    _add_backend_args(p)
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--mode", choices=["segmentation", "detection"], default="segmentation")
    p.add_argument("--pred", help="prediction JSON (timeline or localization output)")
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-format", choices=["json", "breakfast_txt", "thumos_csv"], default="json")
    p.add_argument("--fps", type=float, default=15.0)
    p.add_argument("--video-id", help="filter for thumos_csv ground truth")
    p.add_argument("--duration", type=float, help="override ground-truth duration")
    p.add_argument("--zero-based", action="store_true", help="frame indices count from 0")
    p.add_argument("--snap-gapless", action="store_true", help="close sub-frame gaps after parsing")
    p.add_argument("--thresholds", default="0.3,0.4,0.5,0.6,0.7")
    p.add_argument("--uniform-baseline", action="store_true",
                   help="score the uniform-partition baseline instead of --pred")
    p.add_argument("--video-label", default="", help="video id used in CSV output")
    p.add_argument("--csv", help="also write a CSV report here")
    _add_io_args(p, frames=False)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a resumable configuration sweep")
    p.add_argument("--videos", required=True, help="JSON manifest of videos")
    p.add_argument("--out-dir", required=True, help="ledger and CSV directory")
    p.add_argument("--grids", default="5x5", help="comma-separated, e.g. 2x2,3x3")
    p.add_argument("--iters-list", default="4", help="comma-separated iteration counts")
    p.add_argument("--styles", default="tiled_corner")
    p.add_argument("--noise-rates", default="0", help="comma-separated oracle noise rates")
    _add_io_args(p, frames=False)
    _add_run_args(p)
    _add_backend_args(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("extract-frames", help="decode a video to a frame directory (needs ffmpeg)")
    p.add_argument("video")
    p.add_argument("out_dir")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--pattern", default=DEFAULT_PATTERN)
    p.set_defaults(fn=cmd_extract_frames)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TimelineError, EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendError, OracleError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (FrameIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except httpx.HTTPStatusError as exc:
        status = exc.response.status_code
        print(f"server error {status}: {exc.response.text[:500]}", file=sys.stderr)
        if status == 404:
            return EXIT_IO
        return EXIT_CONFIG if status < 500 else EXIT_BACKEND
    except httpx.HTTPError as exc:
        print(f"server unreachable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except VlmlocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
