"""Timestamp-indexed access to directories of pre-extracted video frames.

Video decoding is delegated to an external tool (see :func:`extract_frames`);
everything else in the package works off a flat directory of numbered image
files, which keeps frame access deterministic and dependency-light.
"""

from __future__ import annotations

import functools
import math
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import ConfigError, FrameIOError

DEFAULT_PATTERN = "frame_%06d.png"

_PCT_D = re.compile(r"%(0?)(\d*)d")


def _pattern_regex(pattern: str) -> re.Pattern[str]:
    m = _PCT_D.search(pattern)
    if m is None:
        raise ConfigError(f"filename pattern needs a %d placeholder: {pattern!r}")
    head, tail = pattern[: m.start()], pattern[m.end() :]
    return re.compile(re.escape(head) + r"(\d+)" + re.escape(tail) + "$")


@functools.lru_cache(maxsize=128)
def _load_image(path: str) -> Image.Image:
    # Cached fully-decoded RGB images; frame directories are treated as
    # immutable inputs, so path alone is a sufficient key.
    try:
        with Image.open(path) as im:
            return im.convert("RGB")
    except OSError as exc:
        raise FrameIOError(f"cannot decode frame {path}: {exc}") from exc


def clear_frame_cache() -> None:
    _load_image.cache_clear()


@dataclass(frozen=True)
class FrameSource:
    """A directory of frames indexed 0..frame_count-1 at a fixed rate.

    Immutable after :func:`open_frame_source`; safe for concurrent reads.
    """

    root: Path
    fps: float
    frame_count: int
    pattern: str = DEFAULT_PATTERN

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps

    def index_at(self, t_s: float) -> int:
        """Map a timestamp to a frame index: round half up, then clamp."""
        if not math.isfinite(t_s):
            raise FrameIOError(f"non-finite timestamp: {t_s!r}")
        idx = int(math.floor(t_s * self.fps + 0.5))
        return min(max(idx, 0), self.frame_count - 1)

    def path_at(self, index: int) -> Path:
        return self.root / (self.pattern % index)

    def frame_at(self, t_s: float) -> tuple[Image.Image, int]:
        """Return the decoded frame nearest to ``t_s`` and its index."""
        idx = self.index_at(t_s)
        return _load_image(str(self.path_at(idx))), idx


def open_frame_source(path: str | Path, fps: float, pattern: str = DEFAULT_PATTERN) -> FrameSource:
    """Open a frame directory and validate the index range is contiguous.

    Frame files themselves are decoded lazily on first access.
    """
    root = Path(path)
    if fps <= 0 or not math.isfinite(fps):
        raise ConfigError(f"fps must be positive, got {fps}")
    if not root.is_dir():
        raise FrameIOError(f"frame directory does not exist: {root}")

    rx = _pattern_regex(pattern)
    indices = []
    for entry in root.iterdir():
        m = rx.match(entry.name)
        if m is not None:
            indices.append(int(m.group(1)))
    if not indices:
        raise FrameIOError(f"no frames found in {root} matching {pattern!r}")

    count = len(indices)
    lo, hi = min(indices), max(indices)
    if lo != 0 or hi != count - 1:
        raise FrameIOError(
            f"frame indices in {root} not contiguous from 0: "
            f"found {count} files spanning [{lo}, {hi}]"
        )
    return FrameSource(root=root, fps=fps, frame_count=count, pattern=pattern)


def extract_frames(
    video_path: str | Path,
    out_dir: str | Path,
    fps: float,
    pattern: str = DEFAULT_PATTERN,
    runner=None,
) -> list[str]:
    """Decode a video into a frame directory using the external ffmpeg binary.

    This is a convenience helper, not part of the core pipeline; it requires
    ffmpeg on PATH. Returns the command that was run.
    """
    if fps <= 0:
        raise ConfigError(f"fps must be positive, got {fps}")
    if runner is None:
        runner = subprocess.run
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cmd = [
        "ffmpeg",
        "-hide_banner",
        "-loglevel", "error",
        "-y",
        "-i", str(video_path),
        "-vf", f"fps={fps}",
        "-start_number", "0",
        str(out / pattern),
    ]
    runner(cmd, check=True)
    return cmd
