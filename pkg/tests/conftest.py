from __future__ import annotations

import json
from pathlib import Path
from types import SimpleNamespace

import pytest
from PIL import Image

from vlmloc.frames import open_frame_source


def make_frame_dir(root: Path, n_frames: int, size=(8, 6)) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n_frames):
        color = ((i * 37) % 256, (i * 11) % 256, 90)
        Image.new("RGB", size, color).save(root / f"frame_{i:06d}.png")
    return root


@pytest.fixture(scope="session")
def frame_dirs(tmp_path_factory):
    """Factory for shared synthetic frame directories, keyed by (duration, fps)."""
    base = tmp_path_factory.mktemp("frames")
    cache: dict[tuple[float, float], Path] = {}

    def get(duration_s: float, fps: float) -> Path:
        key = (duration_s, fps)
        if key not in cache:
            d = base / f"d{duration_s:g}_f{fps:g}"
            make_frame_dir(d, int(round(duration_s * fps)))
            cache[key] = d
        return cache[key]

    return get


@pytest.fixture(scope="session")
def source_60(frame_dirs):
    """60-second source at 4 fps, shared across tests."""
    return open_frame_source(frame_dirs(60, 4), 4.0)


@pytest.fixture()
def project(tmp_path, frame_dirs):
    """A small localization project: frames, gapless ground truth, labels."""
    frames = frame_dirs(30, 4)
    gt = {
        "duration": 30.0,
        "segments": [
            {"label": "pick", "start": 0.0, "end": 6.0},
            {"label": "move", "start": 6.0, "end": 18.0},
            {"label": "put", "start": 18.0, "end": 30.0},
        ],
    }
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps(gt), encoding="utf-8")
    labels_path = tmp_path / "labels.txt"
    labels_path.write_text("pick\nmove\nput\n", encoding="utf-8")
    return SimpleNamespace(
        frames=str(frames), gt=str(gt_path), labels=str(labels_path), fps=4.0, tmp=tmp_path
    )
