"""Fixed-size feature matrices for the classifier.

A gesture sample is a 50 x 325 matrix: one row per frame, 65 object slots of
5 features each (peak, range, doppler, x, y) in stored peak-descending order,
zero-padded. Peak power is log-compressed before the affine normalization;
padding slots stay exactly zero so empty rows are all-zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .radar import FrameDetections

N_FRAMES = 50
N_OBJECTS = 65
N_FEATURES = 5
ROW_WIDTH = N_OBJECTS * N_FEATURES  # 325


class FrameOverflowWarning(UserWarning):
    """More frames than the matrix holds; the oldest were dropped."""


@dataclass(frozen=True)
class FeatureNormalizer:
    """Per-feature affine map over (log1p(peak), range, doppler, x, y)."""

    shift: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    scale: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        """raw: (..., 5) detection features; returns the normalized block."""
        out = np.array(raw, dtype=np.float64)
        out[..., 0] = np.log1p(np.maximum(out[..., 0], 0.0))
        return (out - self.shift) / self.scale

    @classmethod
    def fit(cls, frame_lists: list[list[FrameDetections]]) -> "FeatureNormalizer":
        """Statistics over every detection in the given samples."""
        rows = [
            det
            for frames in frame_lists
            for frame in frames
            for det in frame.detections
        ]
        if not rows:
            return cls()
        raw = np.asarray(rows, dtype=np.float64)
        raw[:, 0] = np.log1p(np.maximum(raw[:, 0], 0.0))
        shift = raw.mean(axis=0)
        scale = np.maximum(raw.std(axis=0), 1e-6)
        return cls(shift=shift, scale=scale)


def featurize(
    frames: list[FrameDetections],
    normalizer: FeatureNormalizer | None = None,
) -> np.ndarray:
    """Pack detection frames into the 50 x 325 matrix (float32).

    More than 50 frames keeps the last 50 (real-time contract) and warns.
    Object slots beyond a frame's detections, and rows beyond the frame
    count, are zero.
    """
    norm = normalizer or FeatureNormalizer()
    if len(frames) > N_FRAMES:
        warnings.warn(
            f"{len(frames)} frames truncated to the last {N_FRAMES}",
            FrameOverflowWarning,
            stacklevel=2,
        )
        frames = frames[-N_FRAMES:]
    matrix = np.zeros((N_FRAMES, ROW_WIDTH), dtype=np.float32)
    for i, frame in enumerate(frames):
        dets = frame.detections[:N_OBJECTS]
        if not dets:
            continue
        block = norm.apply(np.asarray(dets, dtype=np.float64))
        matrix[i, : block.size] = block.reshape(-1).astype(np.float32)
    return matrix
