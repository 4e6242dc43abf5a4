"""Real-time gesture segmentation over the detection stream.

A hysteresis state machine buffers frames between gesture start and end:
a frame is "active" when it carries enough detections; start_frames
consecutive active frames open a gesture (those frames are kept), end_frames
consecutive inactive frames (or a full 50-frame buffer) close it and emit a
feature matrix. A refractory period after each emission blocks immediate
re-triggering.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .features import FeatureNormalizer, featurize
from .radar import FrameDetections

BUFFER_CAPACITY = 50


@dataclass(frozen=True)
class SegmenterConfig:
    activity_min_detections: int = 2
    start_frames: int = 3
    end_frames: int = 5
    max_frames: int = BUFFER_CAPACITY
    refractory_frames: int = 10

    def __post_init__(self) -> None:
        if self.start_frames < 1 or self.end_frames < 1:
            raise ValueError("start_frames and end_frames must be >= 1")
        if not 1 <= self.max_frames <= BUFFER_CAPACITY:
            raise ValueError(f"max_frames must be in [1, {BUFFER_CAPACITY}] (classifier contract)")
        if self.activity_min_detections < 1 or self.refractory_frames < 0:
            raise ValueError("activity_min_detections >= 1, refractory_frames >= 0")


class SegmenterMode(Enum):
    IDLE = "idle"
    ACTIVE = "active"
    REFRACTORY = "refractory"


@dataclass(frozen=True)
class Emission:
    """A completed gesture window plus its timing metadata."""

    matrix: np.ndarray
    first_frame: int
    last_frame: int
    n_frames: int


def offline_emission(
    frames: list[FrameDetections],
    config: SegmenterConfig | None = None,
    normalizer: FeatureNormalizer | None = None,
) -> np.ndarray:
    """Featurize a recorded capture exactly as the live segmenter would emit
    it: the first completed window wins; a gesture still open when the
    recording ends is flushed as-is."""
    seg = Segmenter(config, normalizer)
    for frame in frames:
        emission = seg.push_frame(frame)
        if emission is not None:
            return emission.matrix
    if seg.buffer:
        return featurize(seg.buffer, normalizer)
    return featurize(gesture_window(frames, seg.config), normalizer)


def gesture_window(
    frames: list[FrameDetections],
    config: SegmenterConfig | None = None,
) -> list[FrameDetections]:
    """The window the live segmenter would buffer for a completed gesture:
    everything from the first run of start_frames consecutive active frames.
    Training featurization uses this so offline samples align with live
    emissions. Falls back to the full sequence when no run qualifies."""
    cfg = config or SegmenterConfig()
    run = 0
    for i, frame in enumerate(frames):
        run = run + 1 if len(frame.detections) >= cfg.activity_min_detections else 0
        if run >= cfg.start_frames:
            return frames[i - cfg.start_frames + 1 :]
    return frames


class Segmenter:
    """Single-writer state machine; one producer pushes frames in index order."""

    def __init__(self, config: SegmenterConfig | None = None,
                 normalizer: FeatureNormalizer | None = None):
        self.config = config or SegmenterConfig()
        self.normalizer = normalizer
        self.mode = SegmenterMode.IDLE
        self.buffer: list[FrameDetections] = []
        self.pending: list[FrameDetections] = []
        self.consecutive_inactive = 0
        self.refractory_remaining = 0
        self.last_frame_index: int | None = None
        self.dropped_frames = 0

    def reset(self) -> None:
        """Back to Idle with empty buffers; cancels any refractory period."""
        self.mode = SegmenterMode.IDLE
        self.buffer = []
        self.pending = []
        self.consecutive_inactive = 0
        self.refractory_remaining = 0

    def _is_active(self, frame: FrameDetections) -> bool:
        return len(frame.detections) >= self.config.activity_min_detections

    def _emit(self) -> Emission:
        frames = self.buffer
        emission = Emission(
            matrix=featurize(frames, self.normalizer),
            first_frame=frames[0].frame_index,
            last_frame=frames[-1].frame_index,
            n_frames=len(frames),
        )
        self.mode = SegmenterMode.REFRACTORY
        self.refractory_remaining = self.config.refractory_frames
        self.buffer = []
        self.pending = []
        self.consecutive_inactive = 0
        if self.refractory_remaining == 0:
            self.mode = SegmenterMode.IDLE
        return emission

    def push_frame(self, frame: FrameDetections) -> Emission | None:
        """Advance the machine by one frame; returns a window on gesture end."""
        if self.last_frame_index is not None and frame.frame_index <= self.last_frame_index:
            self.dropped_frames += 1
            return None
        self.last_frame_index = frame.frame_index

        if self.mode is SegmenterMode.REFRACTORY:
            self.refractory_remaining -= 1
            if self.refractory_remaining <= 0:
                self.mode = SegmenterMode.IDLE
            return None

        active = self._is_active(frame)
        if self.mode is SegmenterMode.IDLE:
            if not active:
                self.pending = []
                return None
            self.pending.append(frame)
            if len(self.pending) >= self.config.start_frames:
                self.mode = SegmenterMode.ACTIVE
                self.buffer = self.pending
                self.pending = []
                self.consecutive_inactive = 0
                if len(self.buffer) >= self.config.max_frames:
                    return self._emit()
            return None

        # ACTIVE: inactive frames stay in the buffer until the gesture is
        # confirmed over; they may carry weak gesture energy.
        self.buffer.append(frame)
        self.consecutive_inactive = 0 if active else self.consecutive_inactive + 1
        if self.consecutive_inactive >= self.config.end_frames:
            return self._emit()
        if len(self.buffer) >= self.config.max_frames:
            return self._emit()
        return None
