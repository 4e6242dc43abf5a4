"""Labeled synthetic gesture datasets: generation, manifest, and loading.

Samples are written one binary file each (FDET1 detection sequences by
default, or RCUB1 raw cube sequences) plus a JSON manifest holding counts,
seed, radar config, DSP parameters, and the train/val/test split. Everything
is derived from (seed, sample_id), so generation order does not matter and
regeneration is byte-identical.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .radar import CfarParams, FrameDetections, RadarConfig, extract_frame
from .scene import (
    SMOOTHSTEP_PROFILE,
    IDENTITY_PROFILE,
    EnvironmentKind,
    GestureClass,
    GestureScript,
    environment,
    synth_gesture_sequence,
)

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

NOISY_KINDS = (EnvironmentKind.HAND_PLUS_HUMAN, EnvironmentKind.HAND_HUMAN_ARM_BEHIND)


@dataclass(frozen=True)
class DatasetSpec:
    out_dir: Path
    clean_per_class: int = 200
    noisy_per_class: int = 40     # per noisy condition
    seed: int = 0
    store: str = "detections"     # "detections" (FDET1) or "cubes" (RCUB1)
    radar: RadarConfig = field(default_factory=RadarConfig)
    cfar: CfarParams = field(default_factory=CfarParams)
    notch: int = 1

    def __post_init__(self) -> None:
        if self.clean_per_class <= 0 or self.noisy_per_class <= 0:
            raise ValueError("per-class sample counts must be positive")
        if self.store not in ("detections", "cubes"):
            raise ValueError("store must be 'detections' or 'cubes'")


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    file: str
    label: GestureClass
    env: EnvironmentKind
    split: str       # train / val / test
    n_frames: int


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    seed: int
    store: str
    radar: RadarConfig
    cfar: CfarParams
    notch: int
    samples: tuple[SampleRecord, ...]

    def split_samples(self, split: str) -> list[SampleRecord]:
        return [s for s in self.samples if s.split == split]

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for s in self.samples:
            out.setdefault(s.label.canonical_name, {}).setdefault(s.env.value, 0)
            out[s.label.canonical_name][s.env.value] += 1
        return out


def _sample_script(gesture: GestureClass, rng: np.random.Generator) -> GestureScript:
    """Randomized but physically plausible gesture parameters."""
    return GestureScript(
        gesture=gesture,
        duration=float(rng.uniform(0.8, 2.0)),
        extent=float(rng.uniform(0.12, 0.30)),
        center=(float(rng.uniform(-0.12, 0.12)), float(rng.uniform(0.25, 0.45))),
        jitter=float(rng.uniform(0.010, 0.020)),
        speed_profile=SMOOTHSTEP_PROFILE if rng.random() < 0.5 else IDENTITY_PROFILE,
    )


# Hand-free frames added around each sample so stored captures look like the
# live stream: a short idle lead and a tail long enough to close the gesture
# window (segmenter default end_frames is 5).
SAMPLE_TAIL_FRAMES = 6


def synthesize_sample(
    sample_id: int,
    gesture: GestureClass,
    env_kind: EnvironmentKind,
    spec: DatasetSpec,
) -> list[FrameDetections]:
    """Run one (seed, sample_id)-deterministic sample through the DSP chain."""
    rng = np.random.default_rng([spec.seed, sample_id])
    script = _sample_script(gesture, rng)
    lead = int(rng.integers(1, 4))
    cubes = synth_gesture_sequence(
        script, environment(env_kind), spec.radar, seed=rng,
        lead_frames=lead, tail_frames=SAMPLE_TAIL_FRAMES,
    )
    return [
        extract_frame(cube, spec.cfar, notch=spec.notch, frame_index=i)
        for i, cube in enumerate(cubes)
    ]


def _assignments(spec: DatasetSpec) -> list[tuple[int, GestureClass, EnvironmentKind]]:
    out = []
    sid = 0
    for gesture in GestureClass:
        for env_kind in EnvironmentKind:
            count = spec.clean_per_class if env_kind is EnvironmentKind.HAND_ONLY else spec.noisy_per_class
            for _ in range(count):
                out.append((sid, gesture, env_kind))
                sid += 1
    return out


def _split_assignment(
    assignments: list[tuple[int, GestureClass, EnvironmentKind]],
    seed: int,
) -> dict[int, str]:
    """Test = 30% of noisy-environment samples; the rest is 7:3 train:val."""
    rng = np.random.default_rng([seed, len(assignments), 0x5EED])
    noisy_ids = [sid for sid, _, env in assignments if env in NOISY_KINDS]
    noisy_ids = list(np.array(noisy_ids)[rng.permutation(len(noisy_ids))])
    n_test = (3 * len(noisy_ids)) // 10
    test_ids = set(int(i) for i in noisy_ids[:n_test])

    rest = [sid for sid, _, _ in assignments if sid not in test_ids]
    rest = list(np.array(rest)[rng.permutation(len(rest))])
    n_train = (7 * len(rest)) // 10
    train_ids = set(int(i) for i in rest[:n_train])

    split = {}
    for sid, _, _ in assignments:
        if sid in test_ids:
            split[sid] = "test"
        elif sid in train_ids:
            split[sid] = "train"
        else:
            split[sid] = "val"
    return split


def _limit_blas_threads() -> None:
    # Workers run one sample at a time on small arrays; BLAS threadpools in
    # each process only fight over cores.
    import threadpoolctl

    threadpoolctl.threadpool_limits(1)


def _generate_one(task) -> SampleRecord:
    sid, gesture, env_kind, split, spec, root_str, ext = task
    root = Path(root_str)
    fname = f"sample_{sid:05d}.{ext}"
    path = root / fname
    rng = np.random.default_rng([spec.seed, sid])
    script = _sample_script(gesture, rng)
    lead = int(rng.integers(1, 4))
    cubes = synth_gesture_sequence(
        script, environment(env_kind), spec.radar, seed=rng,
        lead_frames=lead, tail_frames=SAMPLE_TAIL_FRAMES,
    )
    try:
        if spec.store == "detections":
            frames = [
                extract_frame(cube, spec.cfar, notch=spec.notch, frame_index=i)
                for i, cube in enumerate(cubes)
            ]
            formats.write_detection_sequence(path, frames)
            n_frames = len(frames)
        else:
            formats.write_cube_sequence(path, cubes)
            n_frames = len(cubes)
    except OSError as exc:
        raise OSError(f"failed writing sample {sid} to {path}: {exc}") from exc
    return SampleRecord(
        sample_id=sid, file=fname, label=gesture, env=env_kind,
        split=split, n_frames=n_frames,
    )


def generate_dataset(
    spec: DatasetSpec, progress: bool = False, workers: int | None = None
) -> DatasetManifest:
    """Write all sample files plus the manifest; returns the loaded manifest.

    Samples are independent given (seed, sample_id), so generation fans out
    over a process pool; workers=None uses the machine's cores.
    """
    root = Path(spec.out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {root}: {exc}") from exc

    assignments = _assignments(spec)
    split = _split_assignment(assignments, spec.seed)
    ext = "fdet" if spec.store == "detections" else "rcub"
    tasks = [
        (sid, gesture, env_kind, split[sid], spec, str(root), ext)
        for sid, gesture, env_kind in assignments
    ]

    if workers is None:
        workers = min(os.cpu_count() or 1, 8)
    records = []
    if workers > 1 and len(tasks) > 16:
        with ProcessPoolExecutor(max_workers=workers, initializer=_limit_blas_threads) as pool:
            for i, rec in enumerate(pool.map(_generate_one, tasks, chunksize=16)):
                records.append(rec)
                if progress and (i + 1) % 250 == 0:
                    print(f"  generated {i + 1}/{len(tasks)} samples")
    else:
        for i, task in enumerate(tasks):
            records.append(_generate_one(task))
            if progress and (i + 1) % 250 == 0:
                print(f"  generated {i + 1}/{len(tasks)} samples")
    records.sort(key=lambda r: r.sample_id)

    manifest = DatasetManifest(
        root=root, seed=spec.seed, store=spec.store, radar=spec.radar,
        cfar=spec.cfar, notch=spec.notch, samples=tuple(records),
    )
    _write_manifest(manifest)
    return manifest


def _write_manifest(manifest: DatasetManifest) -> None:
    cfg = manifest.radar
    doc = {
        "format_version": FORMAT_VERSION,
        "seed": manifest.seed,
        "store": manifest.store,
        "radar": {
            "n_samples": cfg.n_samples, "n_chirps": cfg.n_chirps,
            "n_channels": cfg.n_channels, "sample_rate": cfg.sample_rate,
            "chirp_slope": cfg.chirp_slope, "chirp_period": cfg.chirp_period,
            "carrier_freq": cfg.carrier_freq, "antenna_spacing": cfg.antenna_spacing,
            "frame_period": cfg.frame_period,
        },
        "dsp": {
            "cfar_train": manifest.cfar.train_cells,
            "cfar_guard": manifest.cfar.guard_cells,
            "cfar_scale": manifest.cfar.scale,
            "cfar_max_detections": manifest.cfar.max_detections,
            "notch": manifest.notch,
        },
        "counts": manifest.counts(),
        "samples": [
            {
                "id": s.sample_id, "file": s.file,
                "label": s.label.canonical_name, "env": s.env.value,
                "split": s.split, "n_frames": s.n_frames,
            }
            for s in manifest.samples
        ],
    }
    with open(manifest.root / MANIFEST_NAME, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_manifest(root: str | Path) -> DatasetManifest:
    root = Path(root)
    with open(root / MANIFEST_NAME) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported manifest version {doc.get('format_version')}")
    radar = RadarConfig(**doc["radar"])
    dsp = doc["dsp"]
    cfar = CfarParams(
        train_cells=dsp["cfar_train"], guard_cells=dsp["cfar_guard"],
        scale=dsp["cfar_scale"], max_detections=dsp["cfar_max_detections"],
    )
    samples = tuple(
        SampleRecord(
            sample_id=s["id"], file=s["file"],
            label=GestureClass.from_name(s["label"]),
            env=EnvironmentKind(s["env"]),
            split=s["split"], n_frames=s["n_frames"],
        )
        for s in doc["samples"]
    )
    return DatasetManifest(
        root=root, seed=doc["seed"], store=doc["store"], radar=radar,
        cfar=cfar, notch=dsp["notch"], samples=samples,
    )


def load_sample_frames(manifest: DatasetManifest, record: SampleRecord) -> list[FrameDetections]:
    path = manifest.root / record.file
    if manifest.store == "detections":
        return formats.read_detection_sequence(path)
    cubes = formats.read_cube_sequence(path)
    return [
        extract_frame(cube, manifest.cfar, notch=manifest.notch, frame_index=i)
        for i, cube in enumerate(cubes)
    ]
