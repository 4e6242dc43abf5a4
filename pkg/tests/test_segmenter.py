import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturecell.radar import Detection, FrameDetections
from gesturecell.segmenter import BUFFER_CAPACITY, Emission, Segmenter, SegmenterConfig, SegmenterMode

from oracles import ReferenceSegmenter


def frame(index, n_detections):
    dets = [
        Detection(peak=float(n_detections - j), range=0.3, doppler=0.4, x=0.0, y=0.3)
        for j in range(n_detections)
    ]
    return FrameDetections(frame_index=index, detections=dets)


def run_counts(segmenter, counts, start_index=0):
    """Push frames with the given detection counts; returns emissions."""
    out = []
    for i, c in enumerate(counts):
        emission = segmenter.push_frame(frame(start_index + i, c))
        if emission is not None:
            out.append(emission)
    return out


class TestBasicRules:
    def test_hundred_empty_frames_no_emission(self):
        seg = Segmenter()
        assert run_counts(seg, [0] * 100) == []
        assert seg.mode is SegmenterMode.IDLE

    def test_three_active_five_inactive_emits_once(self):
        seg = Segmenter()
        emissions = run_counts(seg, [3, 3, 3, 0, 0, 0, 0, 0])
        assert len(emissions) == 1
        e = emissions[0]
        assert e.first_frame == 0
        assert e.last_frame == 7
        assert e.n_frames == 8  # 3 active + 5 tolerated inactive tail
        # Matrix rows 0..7 filled from them; first 3 rows nonzero.
        assert np.any(e.matrix[0] != 0)
        assert np.all(e.matrix[8:] == 0)

    def test_sixty_active_frames_emit_at_buffer_cap(self):
        seg = Segmenter()
        emissions = run_counts(seg, [4] * 60)
        assert len(emissions) == 1
        e = emissions[0]
        assert e.n_frames == BUFFER_CAPACITY
        assert (e.first_frame, e.last_frame) == (0, 49)
        # After the default 10-frame refractory a second gesture can start.
        more = run_counts(seg, [4] * 8, start_index=60)
        assert seg.mode is SegmenterMode.ACTIVE or more

    def test_short_burst_below_start_frames_ignored(self):
        seg = Segmenter()
        assert run_counts(seg, [3, 3, 0, 3, 3, 0, 3, 3, 0]) == []
        assert seg.mode is SegmenterMode.IDLE

    def test_out_of_order_frame_dropped_and_counted(self):
        seg = Segmenter()
        seg.push_frame(frame(5, 3))
        seg.push_frame(frame(4, 3))
        seg.push_frame(frame(5, 3))
        assert seg.dropped_frames == 2

    def test_no_emission_during_refractory(self):
        cfg = SegmenterConfig(refractory_frames=10)
        seg = Segmenter(cfg)
        first = run_counts(seg, [3, 3, 3] + [0] * 5)
        assert len(first) == 1
        # A burst entirely inside the refractory window must not emit.
        during = run_counts(seg, [5] * 10, start_index=100)
        assert during == []

    def test_emission_matrix_shape(self):
        seg = Segmenter()
        (e,) = run_counts(seg, [3, 3, 3] + [0] * 5)
        assert isinstance(e, Emission)
        assert e.matrix.shape == (50, 325)
        assert np.all(np.isfinite(e.matrix))


class TestReset:
    def test_reset_after_partial_buffer(self):
        seg = Segmenter()
        run_counts(seg, [3, 3, 3, 3])
        assert seg.mode is SegmenterMode.ACTIVE
        seg.reset()
        assert seg.mode is SegmenterMode.IDLE
        assert seg.buffer == []
        emissions = run_counts(seg, [3, 3, 3] + [0] * 5, start_index=50)
        assert len(emissions) == 1

    def test_reset_idempotent(self):
        seg = Segmenter()
        seg.reset()
        state_a = (seg.mode, list(seg.buffer), seg.consecutive_inactive)
        seg.reset()
        assert (seg.mode, list(seg.buffer), seg.consecutive_inactive) == state_a

    def test_reset_cancels_refractory(self):
        seg = Segmenter(SegmenterConfig(refractory_frames=30))
        run_counts(seg, [3, 3, 3] + [0] * 5)
        assert seg.mode is SegmenterMode.REFRACTORY
        seg.reset()
        emissions = run_counts(seg, [3, 3, 3] + [0] * 5, start_index=20)
        assert len(emissions) == 1


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            SegmenterConfig(start_frames=0)
        with pytest.raises(ValueError):
            SegmenterConfig(max_frames=51)
        with pytest.raises(ValueError):
            SegmenterConfig(activity_min_detections=0)


@settings(max_examples=150, deadline=None)
@given(
    counts=st.lists(st.integers(0, 6), min_size=1, max_size=200),
    start_frames=st.integers(1, 4),
    end_frames=st.integers(1, 6),
    refractory=st.integers(0, 12),
)
def test_matches_reference_implementation(counts, start_frames, end_frames, refractory):
    cfg = SegmenterConfig(
        start_frames=start_frames, end_frames=end_frames,
        refractory_frames=refractory,
    )
    seg = Segmenter(cfg)
    ref = ReferenceSegmenter(cfg)
    got, want = [], []
    for i, c in enumerate(counts):
        emission = seg.push_frame(frame(i, c))
        if emission is not None:
            got.append((emission.first_frame, emission.last_frame, emission.n_frames))
        window = ref.push(i, c)
        if window is not None:
            want.append(window)
    assert got == want
    for first, last, n in got:
        assert n <= BUFFER_CAPACITY


@settings(max_examples=80, deadline=None)
@given(counts=st.lists(st.integers(0, 6), min_size=1, max_size=300))
def test_emission_bounds_and_refractory_gap(counts):
    cfg = SegmenterConfig()
    seg = Segmenter(cfg)
    emission_frames = []
    for i, c in enumerate(counts):
        emission = seg.push_frame(frame(i, c))
        if emission is not None:
            assert emission.n_frames <= BUFFER_CAPACITY
            emission_frames.append(i)
    for a, b in zip(emission_frames, emission_frames[1:]):
        # Next emission needs the refractory plus a fresh start run.
        assert b - a > cfg.refractory_frames


def test_determinism():
    rng = np.random.default_rng(0)
    counts = list(rng.integers(0, 5, size=400))
    a = Segmenter()
    b = Segmenter()
    ea = run_counts(a, counts)
    eb = run_counts(b, counts)
    assert [(e.first_frame, e.last_frame) for e in ea] == [(e.first_frame, e.last_frame) for e in eb]
    assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(ea, eb))
