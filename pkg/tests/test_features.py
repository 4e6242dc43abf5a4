import numpy as np
import pytest

from gesturecell.features import (
    N_FRAMES,
    ROW_WIDTH,
    FeatureNormalizer,
    FrameOverflowWarning,
    featurize,
)
from gesturecell.radar import Detection, FrameDetections


def frame(i, dets):
    return FrameDetections(frame_index=i, detections=dets)


class TestFeaturize:
    def test_empty_input_all_zero(self):
        m = featurize([])
        assert m.shape == (N_FRAMES, ROW_WIDTH)
        assert np.all(m == 0.0)

    def test_single_detection_layout(self):
        det = Detection(peak=10.0, range=0.3, doppler=0.5, x=0.05, y=0.29)
        m = featurize([frame(0, [det])])
        want = [np.log1p(10.0), 0.3, 0.5, 0.05, 0.29]
        assert m[0, :5] == pytest.approx(want, rel=1e-6)
        assert np.all(m[0, 5:] == 0.0)
        assert np.all(m[1:] == 0.0)

    def test_slots_follow_stored_order(self):
        dets = [
            Detection(9.0, 0.2, 0.1, 0.0, 0.2),
            Detection(4.0, 0.5, -0.3, 0.1, 0.49),
        ]
        m = featurize([frame(0, dets)])
        assert m[0, 0] == pytest.approx(np.log1p(9.0))
        assert m[0, 5] == pytest.approx(np.log1p(4.0))
        assert m[0, 6] == pytest.approx(0.5)

    def test_truncates_to_last_50_with_warning(self):
        frames = [
            frame(i, [Detection(float(i), 0.1, 0.0, 0.0, 0.1)]) for i in range(52)
        ]
        with pytest.warns(FrameOverflowWarning):
            m = featurize(frames)
        # Rows come from frames 2..51.
        assert m[0, 0] == pytest.approx(np.log1p(2.0))
        assert m[49, 0] == pytest.approx(np.log1p(51.0))

    def test_padding_rows_stay_zero_under_normalization(self):
        norm = FeatureNormalizer(shift=np.ones(5), scale=np.full(5, 2.0))
        det = Detection(1.0, 0.3, 0.0, 0.0, 0.3)
        m = featurize([frame(0, [det])], norm)
        assert np.all(m[1:] == 0.0)
        assert np.all(m[0, 5:] == 0.0)
        assert m[0, 1] == pytest.approx((0.3 - 1.0) / 2.0)

    def test_finite_values(self):
        det = Detection(1e12, 1.0, -2.0, 0.5, 0.86)
        m = featurize([frame(0, [det])])
        assert np.all(np.isfinite(m))


class TestNormalizer:
    def test_fit_centers_and_scales(self):
        frames = [
            [frame(0, [Detection(7.0, 0.4, -0.5, -0.1, 0.39),
                       Detection(3.0, 0.2, 0.5, 0.1, 0.17)])]
        ]
        norm = FeatureNormalizer.fit(frames)
        raw = np.array([[7.0, 0.4, -0.5, -0.1, 0.39], [3.0, 0.2, 0.5, 0.1, 0.17]])
        raw[:, 0] = np.log1p(raw[:, 0])
        assert norm.shift == pytest.approx(raw.mean(axis=0))
        assert norm.scale == pytest.approx(np.maximum(raw.std(axis=0), 1e-6))
        normalized = norm.apply(np.array([3.0, 0.2, 0.5, 0.1, 0.17]))
        assert np.all(np.isfinite(normalized))

    def test_fit_on_empty_is_identity(self):
        norm = FeatureNormalizer.fit([])
        assert np.all(norm.shift == 0.0)
        assert np.all(norm.scale == 1.0)
