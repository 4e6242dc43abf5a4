import numpy as np
import pytest

from gesturecell import formats
from gesturecell.dataset import (
    DatasetSpec,
    NOISY_KINDS,
    generate_dataset,
    load_manifest,
    load_sample_frames,
)
from gesturecell.radar import Detection, FrameDetections, RadarConfig
from gesturecell.scene import EnvironmentKind, GestureClass, GestureScript, environment, synth_gesture_sequence

CFG = RadarConfig()


class TestFormats:
    def test_cube_sequence_roundtrip(self, tmp_path):
        script = GestureScript(gesture=GestureClass.Z, duration=0.5)
        cubes = synth_gesture_sequence(script, environment(EnvironmentKind.HAND_ONLY), CFG, seed=1)
        path = tmp_path / "seq.rcub"
        formats.write_cube_sequence(path, cubes)
        loaded = formats.read_cube_sequence(path)
        assert len(loaded) == len(cubes)
        assert loaded[0].config == CFG
        # complex64 on disk: compare at float32 precision.
        for a, b in zip(cubes, loaded):
            assert np.allclose(a.data, b.data, atol=1e-4 * np.abs(a.data).max())

    def test_detection_sequence_roundtrip(self, tmp_path):
        frames = [
            FrameDetections(0, [Detection(5.0, 0.3, 0.4, 0.05, 0.29), Detection(2.0, 0.5, -0.2, 0.0, 0.5)]),
            FrameDetections(1, []),
            FrameDetections(2, [Detection(1.0, 0.7, 0.1, -0.1, 0.69)]),
        ]
        path = tmp_path / "seq.fdet"
        formats.write_detection_sequence(path, frames)
        loaded = formats.read_detection_sequence(path)
        assert [len(f.detections) for f in loaded] == [2, 0, 1]
        assert loaded[0].detections[0].peak == pytest.approx(5.0)
        assert loaded[2].detections[0].x == pytest.approx(-0.1, abs=1e-6)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.fdet"
        path.write_bytes(b"NOPE!" + b"\x00" * 16)
        with pytest.raises(formats.FormatError):
            formats.read_detection_sequence(path)
        with pytest.raises(formats.FormatError):
            formats.read_cube_sequence(path)

    def test_truncated_file_rejected(self, tmp_path):
        frames = [FrameDetections(0, [Detection(5.0, 0.3, 0.4, 0.05, 0.29)])]
        path = tmp_path / "seq.fdet"
        formats.write_detection_sequence(path, frames)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(formats.FormatError):
            formats.read_detection_sequence(path)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    spec = DatasetSpec(out_dir=root, clean_per_class=4, noisy_per_class=2, seed=9)
    manifest = generate_dataset(spec)
    return spec, manifest


class TestGenerateDataset:
    def test_total_count(self, tiny_dataset):
        _, manifest = tiny_dataset
        assert len(manifest.samples) == 9 * (4 + 2 + 2)

    def test_desk_scale_arithmetic(self):
        # Default spec: 9 * (200 + 40 + 40) = 2520 samples.
        spec = DatasetSpec(out_dir="unused")
        assert 9 * (spec.clean_per_class + 2 * spec.noisy_per_class) == 2520

    def test_full_scale_mirrors_published_composition(self):
        spec = DatasetSpec(out_dir="unused", clean_per_class=2000, noisy_per_class=200)
        assert spec.clean_per_class == 2000
        assert spec.noisy_per_class == 200

    def test_test_split_is_noisy_only(self, tiny_dataset):
        _, manifest = tiny_dataset
        test = manifest.split_samples("test")
        assert test, "test split must not be empty"
        assert all(s.env in NOISY_KINDS for s in test)

    def test_split_ratios(self, tiny_dataset):
        _, manifest = tiny_dataset
        n_noisy = sum(1 for s in manifest.samples if s.env in NOISY_KINDS)
        n_test = len(manifest.split_samples("test"))
        assert n_test == (3 * n_noisy) // 10
        rest = len(manifest.samples) - n_test
        n_train = len(manifest.split_samples("train"))
        assert n_train == (7 * rest) // 10
        assert len(manifest.split_samples("val")) == rest - n_train

    def test_manifest_roundtrip(self, tiny_dataset):
        spec, manifest = tiny_dataset
        loaded = load_manifest(spec.out_dir)
        assert loaded.samples == manifest.samples
        assert loaded.radar == manifest.radar
        assert loaded.cfar == manifest.cfar

    def test_samples_loadable_with_frames(self, tiny_dataset):
        spec, manifest = tiny_dataset
        rec = manifest.samples[0]
        frames = load_sample_frames(manifest, rec)
        assert len(frames) == rec.n_frames
        assert all(len(f.detections) <= 65 for f in frames)

    def test_regeneration_is_byte_identical(self, tmp_path):
        spec_a = DatasetSpec(out_dir=tmp_path / "a", clean_per_class=2, noisy_per_class=1, seed=4)
        spec_b = DatasetSpec(out_dir=tmp_path / "b", clean_per_class=2, noisy_per_class=1, seed=4)
        ma = generate_dataset(spec_a)
        mb = generate_dataset(spec_b)
        for sa, sb in zip(ma.samples, mb.samples):
            assert (ma.root / sa.file).read_bytes() == (mb.root / sb.file).read_bytes()

    def test_cube_store_roundtrips_through_dsp(self, tmp_path):
        spec = DatasetSpec(out_dir=tmp_path / "c", clean_per_class=1, noisy_per_class=1,
                           seed=2, store="cubes")
        manifest = generate_dataset(spec)
        rec = manifest.samples[0]
        frames = load_sample_frames(manifest, rec)
        assert len(frames) == rec.n_frames

    def test_invalid_spec_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            DatasetSpec(out_dir=tmp_path, clean_per_class=0)
        with pytest.raises(ValueError):
            DatasetSpec(out_dir=tmp_path, store="parquet")
