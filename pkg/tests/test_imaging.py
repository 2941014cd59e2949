from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from vlmloc.errors import ComposeError, ConfigError
from vlmloc.frames import open_frame_source
from vlmloc.imaging import (
    GridSpec,
    SampledFrame,
    TimeWindow,
    compose,
    encode_jpeg,
    encode_png,
    sample_frames,
)

from conftest import make_frame_dir

BADGE_FILL = (214, 40, 40)


@pytest.fixture(scope="module")
def src60(tmp_path_factory):
    d = make_frame_dir(tmp_path_factory.mktemp("im") / "v", 60)
    return open_frame_source(d, fps=1.0)


def timestamps(frames):
    return [f.timestamp_s for f in frames]


class TestTimeWindow:
    def test_rejects_zero_width(self):
        with pytest.raises(ConfigError):
            TimeWindow(5.0, 0.0)

    def test_clamp_truncates_not_shifts(self):
        assert TimeWindow(5.0, 20.0).clamped(60.0) == (0.0, 15.0)
        assert TimeWindow(55.0, 20.0).clamped(60.0) == (45.0, 60.0)

    def test_clamp_outside_video_fails(self):
        with pytest.raises(ConfigError):
            TimeWindow(100.0, 10.0).clamped(60.0)


class TestSampleFrames:
    def test_full_window_endpoints(self, src60):
        ts = timestamps(sample_frames(src60, TimeWindow(30, 60), 4))
        assert ts == [0.0, 20.0, 40.0, 60.0]

    def test_clamped_window(self, src60):
        ts = timestamps(sample_frames(src60, TimeWindow(5, 20), 3))
        assert ts == [0.0, 7.5, 15.0]

    def test_fine_spacing(self, src60):
        ts = timestamps(sample_frames(src60, TimeWindow(10, 8), 25))
        assert ts[0] == 6.0
        assert ts[-1] == 14.0
        for j in range(25):
            assert ts[j] == pytest.approx(6 + j / 3, abs=1e-12)

    def test_rejects_n_below_two(self, src60):
        with pytest.raises(ConfigError):
            sample_frames(src60, TimeWindow(30, 60), 1)

    def test_grid_indices_one_based_contiguous(self, src60):
        frames = sample_frames(src60, TimeWindow(30, 60), 9)
        assert [f.grid_index for f in frames] == list(range(1, 10))

    @given(
        center=st.floats(10, 50),
        width=st.floats(0.5, 20),
        n=st.integers(2, 30),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetric_about_center_when_unclamped(self, src60, center, width, n):
        # keep the window strictly inside [0, 60] so no clamping happens
        if center - width / 2 < 0 or center + width / 2 > 60:
            width = min(center, 60 - center)
            if width <= 0:
                return
        ts = timestamps(sample_frames(src60, TimeWindow(center, width), n))
        assert all(b >= a for a, b in zip(ts, ts[1:]))
        for j in range(n):
            assert abs(ts[j] + ts[n - 1 - j] - 2 * center) < 1e-9


def grid_frames(n, size=(40, 30)):
    return [
        SampledFrame(grid_index=k, timestamp_s=float(k), image=Image.new("RGB", size, (0, 90, 40)))
        for k in range(1, n + 1)
    ]


class TestCompose:
    def test_2x2_corner_layout(self):
        pi = compose(grid_frames(4), GridSpec(rows=2, cols=2, cell_px=256))
        assert len(pi.images) == 1
        assert pi.images[0].size == (512, 512)
        assert pi.index_to_time == {1: 1.0, 2: 2.0, 3: 3.0, 4: 4.0}

    def test_5x5_spacing_canvas(self):
        pi = compose(grid_frames(25), GridSpec(rows=5, cols=5, cell_px=200, style="tiled_spacing"))
        assert pi.images[0].size == (1040, 1040)  # 5*200 + 4*10

    def test_stacked_emits_one_image_per_frame(self):
        pi = compose(grid_frames(4), GridSpec(rows=2, cols=2, cell_px=64, style="stacked"))
        assert len(pi.images) == 4
        assert len(pi.index_to_time) == 4
        assert all(im.size == (64, 64) for im in pi.images)

    def test_badge_rendered_in_corner(self):
        pi = compose(grid_frames(4), GridSpec(rows=2, cols=2, cell_px=128))
        px = pi.images[0].load()
        diameter = round(0.18 * 128)
        # probe inside the circle but left of the numeral
        x, y = 2 + 3, 2 + diameter // 2
        assert px[x, y] == BADGE_FILL
        assert px[128 + x, y] == BADGE_FILL  # second cell's badge too

    def test_badge_rendered_at_center(self):
        pi = compose(grid_frames(4), GridSpec(rows=2, cols=2, cell_px=128, style="tiled_center"))
        px = pi.images[0].load()
        diameter = round(0.18 * 128)
        x0 = (128 - diameter) // 2
        assert px[x0 + 3, 64] == BADGE_FILL
        assert px[5, 64] != BADGE_FILL

    def test_deterministic_bytes(self):
        spec = GridSpec(rows=2, cols=3, cell_px=96, style="tiled_spacing")
        a = compose(grid_frames(6), spec)
        b = compose(grid_frames(6), spec)
        assert encode_png(a.images[0]) == encode_png(b.images[0])

    def test_letterbox_preserves_aspect(self):
        pi = compose(grid_frames(4, size=(100, 20)), GridSpec(rows=2, cols=2, cell_px=100))
        cell = pi.images[0].crop((0, 40, 100, 60))
        # wide frame letterboxed: content row present, top boundary dark
        assert pi.images[0].load()[50, 1] == (0, 0, 0)

    def test_count_mismatch(self):
        with pytest.raises(ComposeError, match="needs 4 frames"):
            compose(grid_frames(3), GridSpec(rows=2, cols=2, cell_px=64))

    def test_cell_too_small(self):
        with pytest.raises(ComposeError, match="illegible"):
            compose(grid_frames(4), GridSpec(rows=2, cols=2, cell_px=16))

    def test_out_of_order_indices(self):
        frames = grid_frames(4)
        frames[0], frames[1] = frames[1], frames[0]
        with pytest.raises(ComposeError, match="out of order"):
            compose(frames, GridSpec(rows=2, cols=2, cell_px=64))

    def test_index_to_time_round_trips_sampling(self, src60):
        frames = sample_frames(src60, TimeWindow(30, 40), 6)
        pi = compose(frames, GridSpec(rows=2, cols=3, cell_px=48))
        for f in frames:
            assert pi.index_to_time[f.grid_index] == f.timestamp_s


class TestGridSpec:
    def test_rejects_single_cell(self):
        with pytest.raises(ConfigError):
            GridSpec(rows=1, cols=1)

    def test_rejects_oversized(self):
        with pytest.raises(ConfigError):
            GridSpec(rows=9, cols=9)

    def test_rejects_unknown_style(self):
        with pytest.raises(ConfigError):
            GridSpec(style="mosaic")

    def test_boundary_sizes_allowed(self):
        assert GridSpec(rows=1, cols=2).n == 2
        assert GridSpec(rows=8, cols=8).n == 64


def test_encoders_distinct():
    im = Image.new("RGB", (40, 40), (10, 20, 30))
    png = encode_png(im)
    jpg = encode_jpeg(im)
    assert png[:4] == b"\x89PNG"
    assert jpg[:2] == b"\xff\xd8"
