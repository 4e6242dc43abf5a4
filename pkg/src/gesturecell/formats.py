"""Binary sample formats.

RCUB1: radar cube sequence. Little-endian header
    magic "RCUB1" | u32 n_frames | u32 n_samples | u32 n_chirps | u32 n_channels
    | f64 sample_rate | f64 chirp_slope | f64 chirp_period | f64 carrier_freq
    | f64 antenna_spacing | f64 frame_period
followed by n_frames cubes of interleaved complex64 samples in
[sample][chirp][channel] order.

FDET1: detection sequence. Little-endian
    magic "FDET1" | u32 n_frames | per frame: u32 n_detections then
    n_detections x 5 float32 (peak, range, doppler, x, y).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .radar import Detection, FrameDetections, RadarConfig, RadarCube

RCUB_MAGIC = b"RCUB1"
FDET_MAGIC = b"FDET1"

_RCUB_HEADER = struct.Struct("<5sIIII6d")
_U32 = struct.Struct("<I")


class FormatError(ValueError):
    """File does not conform to the declared format."""


def write_cube_sequence(path: str | Path, cubes: list[RadarCube]) -> None:
    if not cubes:
        raise ValueError("cannot write an empty cube sequence")
    cfg = cubes[0].config
    if any(c.config != cfg for c in cubes):
        raise ValueError("all cubes in a sequence must share one config")
    with open(path, "wb") as fh:
        fh.write(_RCUB_HEADER.pack(
            RCUB_MAGIC, len(cubes),
            cfg.n_samples, cfg.n_chirps, cfg.n_channels,
            cfg.sample_rate, cfg.chirp_slope, cfg.chirp_period,
            cfg.carrier_freq, cfg.antenna_spacing, cfg.frame_period,
        ))
        for cube in cubes:
            fh.write(np.ascontiguousarray(cube.data, dtype="<c8").tobytes())


def read_cube_sequence(path: str | Path) -> list[RadarCube]:
    with open(path, "rb") as fh:
        header = fh.read(_RCUB_HEADER.size)
        if len(header) < _RCUB_HEADER.size:
            raise FormatError(f"{path}: truncated RCUB1 header")
        (magic, n_frames, n_samples, n_chirps, n_channels,
         sample_rate, chirp_slope, chirp_period,
         carrier_freq, antenna_spacing, frame_period) = _RCUB_HEADER.unpack(header)
        if magic != RCUB_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        cfg = RadarConfig(
            n_samples=n_samples, n_chirps=n_chirps, n_channels=n_channels,
            sample_rate=sample_rate, chirp_slope=chirp_slope, chirp_period=chirp_period,
            carrier_freq=carrier_freq, antenna_spacing=antenna_spacing,
            frame_period=frame_period,
        )
        frame_bytes = n_samples * n_chirps * n_channels * 8
        cubes = []
        for i in range(n_frames):
            raw = fh.read(frame_bytes)
            if len(raw) < frame_bytes:
                raise FormatError(f"{path}: truncated at frame {i}")
            data = np.frombuffer(raw, dtype="<c8").reshape(n_samples, n_chirps, n_channels)
            cubes.append(RadarCube(data=data.astype(np.complex128), config=cfg))
    return cubes


def write_detection_sequence(path: str | Path, frames: list[FrameDetections]) -> None:
    with open(path, "wb") as fh:
        fh.write(FDET_MAGIC)
        fh.write(_U32.pack(len(frames)))
        for frame in frames:
            fh.write(_U32.pack(len(frame.detections)))
            if frame.detections:
                arr = np.asarray(frame.detections, dtype="<f4")
                fh.write(arr.tobytes())


def read_detection_sequence(path: str | Path) -> list[FrameDetections]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != FDET_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        raw = fh.read(_U32.size)
        if len(raw) < _U32.size:
            raise FormatError(f"{path}: truncated FDET1 header")
        (n_frames,) = _U32.unpack(raw)
        frames = []
        for i in range(n_frames):
            raw = fh.read(_U32.size)
            if len(raw) < _U32.size:
                raise FormatError(f"{path}: truncated at frame {i}")
            (count,) = _U32.unpack(raw)
            body = fh.read(count * 5 * 4)
            if len(body) < count * 5 * 4:
                raise FormatError(f"{path}: truncated detections at frame {i}")
            arr = np.frombuffer(body, dtype="<f4").reshape(count, 5)
            detections = [Detection(*map(float, row)) for row in arr]
            frames.append(FrameDetections(frame_index=i, detections=detections))
    return frames
