"""Labeled timelines: the Segment type, annotation parsers, and serialization.

Three input formats are supported:

* ``json`` -- ``{"duration": s, "segments": [{"label", "start", "end"}, ...]}``
* ``breakfast_txt`` -- whitespace-separated ``start_frame end_frame label``
  lines; converted to seconds with a caller-supplied fps
* ``thumos_csv`` -- ``video_id,label,start_s,end_s`` lines (header optional),
  filtered to one video id
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, TimelineError

FORMATS = ("json", "breakfast_txt", "thumos_csv")


@dataclass(frozen=True)
class Segment:
    label: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise TimelineError(f"non-finite segment bounds: {self!r}")
        if self.start_s < 0 or self.end_s < self.start_s:
            raise TimelineError(
                f"segment {self.label!r} has invalid bounds [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class Timeline:
    """An ordered list of segments over a fixed video duration."""

    duration_s: float
    segments: list[Segment] = field(default_factory=list)

    def labels(self) -> list[str]:
        return [s.label for s in self.segments]

    def label_at(self, t_s: float) -> str | None:
        """Label of the segment with start <= t < end, or None in a gap."""
        for seg in self.segments:
            if seg.start_s <= t_s < seg.end_s:
                return seg.label
        return None

    def validate(self, gapless: bool = False, tol: float = 1e-6) -> None:
        if self.duration_s <= 0 and (gapless or self.segments):
            raise TimelineError(f"duration must be positive, got {self.duration_s}")
        prev_end = None
        for i, seg in enumerate(self.segments):
            if seg.end_s > self.duration_s + tol:
                raise TimelineError(
                    f"segment {i} ends at {seg.end_s} beyond duration {self.duration_s}"
                )
            if prev_end is not None:
                if seg.start_s < prev_end - tol and gapless:
                    raise TimelineError(f"segments {i - 1} and {i} overlap in gapless mode")
                if i > 0 and seg.start_s < self.segments[i - 1].start_s:
                    raise TimelineError("segments not sorted by start")
            prev_end = seg.end_s
        if not gapless:
            # detection-style data: gaps are fine, same-class overlap is not
            last_end_by_label: dict[str, float] = {}
            for i, seg in enumerate(self.segments):
                prev = last_end_by_label.get(seg.label)
                if prev is not None and seg.start_s < prev - tol:
                    raise TimelineError(
                        f"segments of class {seg.label!r} overlap (segment {i})"
                    )
                last_end_by_label[seg.label] = max(
                    seg.end_s, prev if prev is not None else seg.end_s
                )
        if gapless:
            if not self.segments:
                raise TimelineError("gapless timeline has no segments")
            if abs(self.segments[0].start_s) > tol:
                raise TimelineError("gapless timeline must start at 0")
            for i in range(1, len(self.segments)):
                gap = self.segments[i].start_s - self.segments[i - 1].end_s
                if abs(gap) > tol:
                    raise TimelineError(
                        f"gap of {gap:.6g}s between segments {i - 1} and {i}"
                    )
            if abs(self.segments[-1].end_s - self.duration_s) > tol:
                raise TimelineError("gapless timeline must cover the full duration")


def _parse_json(path: Path) -> Timeline:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TimelineError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "duration" not in doc or "segments" not in doc:
        raise TimelineError(f"{path}: expected object with 'duration' and 'segments'")
    segs = []
    for i, raw in enumerate(doc["segments"]):
        try:
            segs.append(Segment(str(raw["label"]), float(raw["start"]), float(raw["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TimelineError(f"{path}: segment {i} malformed: {exc}") from exc
    segs.sort(key=lambda s: (s.start_s, s.end_s))
    tl = Timeline(duration_s=float(doc["duration"]), segments=segs)
    tl.validate(gapless=False)
    return tl


def _parse_breakfast(path: Path, fps: float, zero_based: bool) -> Timeline:
    if fps is None or fps <= 0:
        raise ConfigError("breakfast_txt requires a positive fps")
    shift = 1 if zero_based else 0
    segs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise TimelineError(f"{path}:{lineno}: expected 'start end label', got {line!r}")
        try:
            f0, f1 = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise TimelineError(f"{path}:{lineno}: non-integer frame index") from exc
        if f1 < f0:
            raise TimelineError(f"{path}:{lineno}: end frame {f1} before start frame {f0}")
        label = " ".join(parts[2:])
        segs.append(Segment(label, (f0 + shift) / fps, (f1 + shift) / fps))
    if not segs:
        raise TimelineError(f"{path}: no segments")
    segs.sort(key=lambda s: (s.start_s, s.end_s))
    return Timeline(duration_s=segs[-1].end_s, segments=segs)


def _parse_thumos(path: Path, video_id: str, duration_s: float | None) -> Timeline:
    if not video_id:
        raise ConfigError("thumos_csv requires a video_id to filter on")
    segs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise TimelineError(f"{path}:{lineno}: expected 4 comma-separated fields")
        if lineno == 1 and not _is_number(parts[2]):
            continue  # header row
        try:
            start, end = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise TimelineError(f"{path}:{lineno}: non-numeric time field") from exc
        if end < start:
            raise TimelineError(f"{path}:{lineno}: end {end} before start {start}")
        if parts[0] == video_id:
            segs.append(Segment(parts[1], start, end))
    segs.sort(key=lambda s: (s.start_s, s.end_s))
    dur = duration_s if duration_s is not None else (segs[-1].end_s if segs else 0.0)
    return Timeline(duration_s=dur, segments=segs)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def parse_timeline(
    path: str | Path,
    format: str = "json",
    *,
    fps: float | None = None,
    video_id: str | None = None,
    duration_s: float | None = None,
    zero_based: bool = False,
    snap_gapless: bool = False,
) -> Timeline:
    """Parse an annotation file into a :class:`Timeline`.

    ``snap_gapless`` closes sub-frame gaps left by frame-index conversion:
    each interior segment start is pulled back to the previous end and the
    first start is snapped to 0 when the gap is at most 1.5 frame intervals.
    """
    p = Path(path)
    if not p.is_file():
        raise TimelineError(f"annotation file does not exist: {p}")
    if format == "json":
        tl = _parse_json(p)
    elif format == "breakfast_txt":
        tl = _parse_breakfast(p, fps, zero_based)
    elif format == "thumos_csv":
        tl = _parse_thumos(p, video_id or "", duration_s)
    else:
        raise ConfigError(f"unknown timeline format {format!r}; expected one of {FORMATS}")

    if snap_gapless:
        if format == "breakfast_txt" and fps:
            tol = 1.5 / fps
        else:
            tol = 1e-6
        tl = _snap(tl, tol)
    return tl


def _snap(tl: Timeline, tol: float) -> Timeline:
    segs = list(tl.segments)
    if not segs:
        return tl
    out = []
    prev_end = 0.0
    for i, seg in enumerate(segs):
        start = seg.start_s
        gap = start - prev_end
        if gap < -1e-9:
            raise TimelineError(f"segments {i - 1} and {i} overlap in gapless mode")
        if 0 < gap <= tol:
            start = prev_end
        out.append(Segment(seg.label, start, seg.end_s))
        prev_end = seg.end_s
    return Timeline(duration_s=tl.duration_s, segments=out)


def timeline_to_dict(tl: Timeline) -> dict:
    return {
        "duration": tl.duration_s,
        "segments": [
            {"label": s.label, "start": s.start_s, "end": s.end_s} for s in tl.segments
        ],
    }


def save_timeline(tl: Timeline, path: str | Path) -> None:
    """Write the JSON form; parsing it back yields an identical timeline."""
    Path(path).write_text(
        json.dumps(timeline_to_dict(tl), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
