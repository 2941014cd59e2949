"""Configuration sweeps over grids, iteration counts, styles, and noise.

Each cell of the cartesian product runs the transition pipeline over every
video in the manifest and records mean segmentation metrics. Completed
cells are appended to an on-disk ledger as soon as they finish, so an
interrupted sweep resumes without duplicating work or API spend.
"""

from __future__ import annotations

import csv
import json
import re
from itertools import product
from pathlib import Path

from .errors import ConfigError, VlmlocError
from .metrics import evaluate_segmentation
from .models import SweepRequest, SweepResponse, SweepRow
from .runner import make_backend, make_search_config
from .frames import open_frame_source
from .search import estimate_transitions
from .timelines import parse_timeline

_GRID_RX = re.compile(r"^(\d+)x(\d+)$")

LEDGER_NAME = "cells.jsonl"
CSV_NAME = "sweep.csv"
CSV_FIELDS = [
    "cell_id", "grid", "iterations", "style", "noise_rate",
    "n_videos", "mof", "mean_iou", "f1", "error",
]


def parse_grid(text: str) -> tuple[int, int]:
    m = _GRID_RX.match(text.strip())
    if not m:
        raise ConfigError(f"grid must look like '5x5', got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _load_videos(path: str) -> list[dict]:
    try:
        videos = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read video manifest {path}: {exc}") from exc
    if not isinstance(videos, list) or not videos:
        raise ConfigError(f"{path}: expected a non-empty list of video entries")
    for i, v in enumerate(videos):
        for key in ("frames_dir", "fps", "labels", "gt_path"):
            if key not in v:
                raise ConfigError(f"{path}: video entry {i} missing {key!r}")
    return videos


def _load_ledger(path: Path) -> dict[str, SweepRow]:
    done: dict[str, SweepRow] = {}
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = SweepRow.model_validate_json(line)
                done[row.cell_id] = row
    return done


def _run_cell(videos: list[dict], req: SweepRequest, grid: str, iters: int,
              style: str, noise: float) -> tuple[list[float], list[float], list[float], list[str]]:
    rows, cols = parse_grid(grid)
    mofs, ious, f1s, errors = [], [], [], []
    for v in videos:
        vid = v.get("video_id", v["frames_dir"])
        try:
            run = req.run.model_copy(deep=True)
            run.grid.rows, run.grid.cols, run.grid.style = rows, cols, style
            run.iterations = iters
            run.backend.noise_rate = noise
            if run.backend.kind == "oracle":
                run.backend.gt_path = v["gt_path"]
                run.backend.gt_format = v.get("gt_format", "json")
                run.backend.gt_fps = v.get("gt_fps")
            source = open_frame_source(v["frames_dir"], float(v["fps"]))
            backend = make_backend(run.backend, run.seed)
            config = make_search_config(run)
            result = estimate_transitions(source, list(v["labels"]), config, backend)
            gt = parse_timeline(
                v["gt_path"], v.get("gt_format", "json"), fps=v.get("gt_fps")
            )
            report = evaluate_segmentation(result.timeline, gt, float(v["fps"]))
            mofs.append(report.mof)
            ious.append(report.mean_iou)
            f1s.append(report.f1)
        except VlmlocError as exc:
            errors.append(f"{vid}: {exc}")
    return mofs, ious, f1s, errors


def run_sweep(req: SweepRequest) -> SweepResponse:
    videos = _load_videos(req.videos_path)
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = out_dir / LEDGER_NAME
    done = _load_ledger(ledger_path)

    rows: list[SweepRow] = []
    completed = skipped = 0
    for grid, iters, style, noise in product(
        req.grids, req.iterations, req.styles, req.noise_rates
    ):
        cell_id = f"{grid}|it{iters}|{style}|noise{noise:g}"
        if cell_id in done:
            rows.append(done[cell_id])
            skipped += 1
            continue
        mofs, ious, f1s, errors = _run_cell(videos, req, grid, iters, style, noise)
        row = SweepRow(
            cell_id=cell_id,
            grid=grid,
            iterations=iters,
            style=style,
            noise_rate=noise,
            n_videos=len(mofs),
            mof=sum(mofs) / len(mofs) if mofs else None,
            mean_iou=sum(ious) / len(ious) if ious else None,
            f1=sum(f1s) / len(f1s) if f1s else None,
            error="; ".join(errors),
        )
        with ledger_path.open("a", encoding="utf-8") as fh:
            fh.write(row.model_dump_json() + "\n")
        rows.append(row)
        completed += 1

    csv_path = out_dir / CSV_NAME
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    return SweepResponse(
        rows=rows, csv_path=str(csv_path), completed=completed, skipped=skipped
    )
