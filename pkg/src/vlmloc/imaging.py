"""Frame sampling over a time window and composition of annotated prompt images.

Sampling is endpoint-inclusive and uniform, so the window edges are always
represented. Composition supports four rendering styles:

* ``tiled_corner`` -- row-major grid, numbered badge at each cell's top-left
* ``tiled_center`` -- badge rendered at the cell center
* ``tiled_spacing`` -- as corner, with a gutter of 0.05 * cell_px between cells
* ``stacked`` -- no grid; one badge-annotated image per frame, in index order
"""

from __future__ import annotations

import collections
import functools
import io
import math
import threading
from dataclasses import dataclass, field

from PIL import Image, ImageDraw, ImageFont

from .errors import ComposeError, ConfigError
from .frames import FrameSource

STYLES = ("tiled_corner", "tiled_center", "tiled_spacing", "stacked")

# Long edge of an 8x8 tiling at the default cell size stays within 2048 px,
# a safe input size for current hosted VLMs.
DEFAULT_CELL_PX = 256
MIN_CELL_PX = 32

_CANVAS_BG = (255, 255, 255)
_LETTERBOX_BG = (0, 0, 0)
_BADGE_FILL = (214, 40, 40)
_BADGE_TEXT = (255, 255, 255)


@dataclass(frozen=True)
class TimeWindow:
    """A sampling interval given as center and width, both in seconds."""

    center_s: float
    width_s: float

    def __post_init__(self) -> None:
        if not (self.width_s > 0) or not math.isfinite(self.width_s):
            raise ConfigError(f"window width must be positive, got {self.width_s}")
        if not math.isfinite(self.center_s):
            raise ConfigError(f"window center must be finite, got {self.center_s}")

    def clamped(self, duration_s: float) -> tuple[float, float]:
        """Intersect with [0, duration]; windows truncate, they never shift."""
        a = max(0.0, self.center_s - self.width_s / 2)
        b = min(duration_s, self.center_s + self.width_s / 2)
        if b < a:
            raise ConfigError(
                f"window {self.center_s}+/-{self.width_s / 2} lies outside [0, {duration_s}]"
            )
        return a, b


@dataclass(frozen=True)
class GridSpec:
    rows: int = 5
    cols: int = 5
    cell_px: int = DEFAULT_CELL_PX
    style: str = "tiled_corner"
    label_scale: float = 0.18

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.n < 2:
            raise ConfigError("grid needs at least 2 cells for the search to progress")
        if self.n > 64:
            raise ConfigError(f"grid of {self.n} cells exceeds the 64-cell cap")
        if self.style not in STYLES:
            raise ConfigError(f"unknown style {self.style!r}; expected one of {STYLES}")
        if not 0 < self.label_scale <= 1:
            raise ConfigError(f"label_scale must be in (0, 1], got {self.label_scale}")

    @property
    def n(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class SampledFrame:
    grid_index: int  # 1-based badge number
    timestamp_s: float
    image: Image.Image


@dataclass(frozen=True)
class PromptImage:
    """One composited image (tiled styles) or an ordered list (stacked)."""

    images: tuple[Image.Image, ...]
    index_to_time: dict[int, float] = field(default_factory=dict)

    @property
    def n_badges(self) -> int:
        return len(self.index_to_time)


def sample_frames(source: FrameSource, window: TimeWindow, n: int) -> list[SampledFrame]:
    """Sample ``n`` frames at regular intervals from the clamped window.

    Timestamps are t_j = a + j*(b-a)/(n-1), j = 0..n-1, so both window
    edges are always included. A window collapsed to a point yields n
    identical frames; that degenerate case is permitted.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 samples, got {n}")
    a, b = window.clamped(source.duration_s)
    out = []
    step = (b - a) / (n - 1)
    for j in range(n):
        t = a + j * step
        image, _ = source.frame_at(t)
        out.append(SampledFrame(grid_index=j + 1, timestamp_s=t, image=image))
    return out


def _letterbox_raw(im: Image.Image, cell_px: int) -> Image.Image:
    # Preserve aspect ratio; pad rather than crop so evidence near frame
    # edges survives.
    scale = cell_px / max(im.width, im.height)
    nw = max(1, round(im.width * scale))
    nh = max(1, round(im.height * scale))
    resized = im.resize((nw, nh), Image.LANCZOS)
    cell = Image.new("RGB", (cell_px, cell_px), _LETTERBOX_BG)
    cell.paste(resized, ((cell_px - nw) // 2, (cell_px - nh) // 2))
    return cell


class _TileCache:
    """LRU of letterboxed cells keyed by source image identity.

    Frame objects come from the frame cache and get re-tiled across
    iterations and tasks, so resizes repeat a lot. Entries hold a strong
    reference to the source image, which keeps its id() from being reused
    while the entry lives.
    """

    def __init__(self, maxsize: int = 256):
        self.maxsize = maxsize
        self._lock = threading.Lock()
        self._data: "collections.OrderedDict[tuple[int, int], tuple[Image.Image, Image.Image]]" = (
            collections.OrderedDict()
        )

    def get(self, im: Image.Image, cell_px: int) -> Image.Image:
        key = (id(im), cell_px)
        with self._lock:
            hit = self._data.get(key)
            if hit is not None and hit[0] is im:
                self._data.move_to_end(key)
                return hit[1]
        cell = _letterbox_raw(im, cell_px)
        with self._lock:
            self._data[key] = (im, cell)
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return cell


_tiles = _TileCache()


def _letterbox(im: Image.Image, cell_px: int) -> Image.Image:
    # Copy: callers draw badges onto the result.
    return _tiles.get(im, cell_px).copy()


@functools.lru_cache(maxsize=32)
def _badge_font(size: int) -> ImageFont.ImageFont:
    return ImageFont.load_default(size=max(8, size))


@functools.lru_cache(maxsize=32)
def _badge_font(size: int) -> ImageFont.ImageFont:
    return ImageFont.load_default(size=max(8, size))


def _draw_badge(im: Image.Image, number: int, diameter: int, centered: bool) -> None:
    draw = ImageDraw.Draw(im)
    if centered:
        x0 = (im.width - diameter) // 2
        y0 = (im.height - diameter) // 2
    else:
        x0 = y0 = 2
    draw.ellipse((x0, y0, x0 + diameter, y0 + diameter), fill=_BADGE_FILL)
    font = _badge_font(round(diameter * 0.62))
    cx, cy = x0 + diameter / 2, y0 + diameter / 2
    draw.text((cx, cy), str(number), fill=_BADGE_TEXT, font=font, anchor="mm")


def compose(frames: list[SampledFrame], grid: GridSpec) -> PromptImage:
    """Composite sampled frames into an annotated prompt image.

    Deterministic: identical inputs produce bit-identical output images.
    """
    if not frames:
        raise ComposeError("no frames to compose")
    for pos, f in enumerate(frames, start=1):
        if f.grid_index != pos:
            raise ComposeError(f"grid_index {f.grid_index} out of order at position {pos}")
    if grid.cell_px < MIN_CELL_PX:
        raise ComposeError(
            f"cell_px {grid.cell_px} below {MIN_CELL_PX}; badge would be illegible"
        )
    index_to_time = {f.grid_index: f.timestamp_s for f in frames}
    diameter = max(8, round(grid.label_scale * grid.cell_px))

    if grid.style == "stacked":
        images = []
        for f in frames:
            cell = _letterbox(f.image, grid.cell_px)
            _draw_badge(cell, f.grid_index, diameter, centered=False)
            images.append(cell)
        return PromptImage(images=tuple(images), index_to_time=index_to_time)

    if len(frames) != grid.n:
        raise ComposeError(
            f"{grid.rows}x{grid.cols} tiling needs {grid.n} frames, got {len(frames)}"
        )
    gutter = round(0.05 * grid.cell_px) if grid.style == "tiled_spacing" else 0
    width = grid.cols * grid.cell_px + (grid.cols - 1) * gutter
    height = grid.rows * grid.cell_px + (grid.rows - 1) * gutter
    canvas = Image.new("RGB", (width, height), _CANVAS_BG)
    centered = grid.style == "tiled_center"
    for f in frames:
        pos = f.grid_index - 1
        r, c = divmod(pos, grid.cols)
        cell = _letterbox(f.image, grid.cell_px)
        _draw_badge(cell, f.grid_index, diameter, centered=centered)
        canvas.paste(cell, (c * (grid.cell_px + gutter), r * (grid.cell_px + gutter)))
    return PromptImage(images=(canvas,), index_to_time=index_to_time)


def encode_png(im: Image.Image) -> bytes:
    """Lossless encoding, used for hashing and golden comparisons."""
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(im: Image.Image, quality: int = 90) -> bytes:
    """Lossy encoding for network transmission to model backends."""
    buf = io.BytesIO()
    im.save(buf, format="JPEG", quality=quality)
    return buf.getvalue()
