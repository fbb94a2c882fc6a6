"""
Detection Tests
Heatmap decoding, IoU, NMS and heatmap files.
"""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from app.core.config import DetectConfig
from app.core.errors import InputError, ParseError
from app.models.detection import Box, HeatmapSet
from app.services.detect import (
    decode_heatmaps,
    detect_frame,
    find_peaks,
    iou,
    iter_heatmap_dir,
    nms,
    nms_all_classes,
    read_heatmap_file,
    write_heatmap_file,
)
from app.services.oracles import _naive_nms, oracle_decode
from tests.conftest import make_det


def empty_maps(grid=16, classes=1):
    return (
        np.zeros((grid, grid, classes)),
        np.zeros((grid, grid, 2)),
        np.zeros((grid, grid, 2)),
    )


def random_heatmaps(seed, grid=16, classes=3, down_ratio=4):
    rng = np.random.default_rng(seed)
    return HeatmapSet(
        center=rng.random((grid, grid, classes)),
        size=rng.uniform(0, 40, (grid, grid, 2)),
        offset=rng.random((grid, grid, 2)),
        down_ratio=down_ratio,
        width=grid * down_ratio,
        height=grid * down_ratio,
    )


def random_boxes(rng, count, extent=100.0):
    xy = rng.uniform(0, extent, (count, 2))
    wh = rng.uniform(5, 30, (count, 2))
    return [Box(float(x), float(y), float(x + w), float(y + h)) for (x, y), (w, h) in zip(xy, wh)]


# =============================================================================
# IOU
# =============================================================================

class TestIou:
    """Test box overlap"""

    def test_identical(self):
        assert iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0

    def test_half_shift(self):
        """Test (0,0,10,10) vs (5,0,15,10) is 50/150"""
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0

    def test_touching_edges(self):
        assert iou(Box(0, 0, 10, 10), Box(10, 0, 20, 10)) == 0.0

    def test_degenerate_boxes(self):
        """Test zero-area boxes have zero overlap"""
        assert iou(Box(5, 5, 5, 5), Box(5, 5, 5, 5)) == 0.0

    @given(st.integers(min_value=0, max_value=5000))
    def test_symmetric_and_bounded(self, seed):
        a, b = random_boxes(np.random.default_rng(seed), 2)
        value = iou(a, b)
        assert value == iou(b, a)
        assert 0.0 <= value <= 1.0


# =============================================================================
# DECODING
# =============================================================================

class TestDecodeHeatmaps:
    """Test keypoint decoding"""

    def test_single_peak(self):
        """Test a 0.9 peak at cell (4, 5) with offset 0.5 and size 20x10"""
        center, size, offset = empty_maps()
        center[5, 4, 0] = 0.9
        size[5, 4] = (20, 10)
        offset[5, 4] = (0.5, 0.5)
        heatmaps = HeatmapSet(center, size, offset, down_ratio=4, width=64, height=64)

        (det,) = decode_heatmaps(heatmaps)
        assert det.box == Box(8, 17, 28, 27)
        assert det.scores == (0.9,)

    def test_empty_heatmap(self):
        center, size, offset = empty_maps()
        assert decode_heatmaps(HeatmapSet(center, size, offset, 4, 64, 64)) == []

    def test_box_clamped_to_frame(self):
        center, size, offset = empty_maps()
        center[0, 0, 0] = 0.8
        size[0, 0] = (30, 30)
        (det,) = decode_heatmaps(HeatmapSet(center, size, offset, 4, 64, 64))
        assert det.box == Box(0, 0, 15, 15)

    def test_plateau_keeps_first_cell(self):
        """Test equal neighbours yield only the earliest cell in scan order"""
        center = np.zeros((4, 4, 1))
        center[1, 1, 0] = center[1, 2, 0] = 0.7
        peaks = find_peaks(center)
        assert peaks[1, 1, 0] and not peaks[1, 2, 0]

    def test_score_floor(self):
        center, size, offset = empty_maps()
        center[3, 3, 0] = 0.04
        assert decode_heatmaps(HeatmapSet(center, size, offset, 4, 64, 64), score_floor=0.05) == []

    def test_max_per_class(self):
        rng_maps = random_heatmaps(5)
        dets = decode_heatmaps(rng_maps, max_per_class=2)
        for c in range(3):
            assert sum(1 for d in dets if d.scores[c] > 0) <= 2

    def test_dense_scores(self):
        """Test dense mode reads every class at the peak cell"""
        center, size, offset = empty_maps(classes=2)
        center[2, 2] = (0.9, 0.3)
        (det,) = decode_heatmaps(HeatmapSet(center, size, offset, 4, 64, 64), dense_scores=True)
        assert det.scores == (0.9, 0.3)

    def test_invalid_grid(self):
        center, size, offset = empty_maps()
        with pytest.raises(InputError):
            HeatmapSet(center, size, offset, down_ratio=4, width=100, height=64)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_exhaustive_scan(self, seed):
        """Test decoding against a cell-by-cell neighbourhood scan"""
        heatmaps = random_heatmaps(seed)
        dets = decode_heatmaps(heatmaps)
        expected = oracle_decode(
            heatmaps.center, heatmaps.size, heatmaps.offset,
            heatmaps.down_ratio, heatmaps.width, heatmaps.height,
        )
        assert len(dets) == len(expected)
        for det, (c, box, score) in zip(dets, expected):
            assert det.box == Box(*box)
            assert det.scores[c] == score


# =============================================================================
# NMS
# =============================================================================

class TestNms:
    """Test per-class greedy suppression"""

    def test_duplicate_suppressed(self):
        """Test two identical boxes keep only the 0.9 detection"""
        a = make_det((0, 0, 10, 10), (0.9,))
        b = make_det((0, 0, 10, 10), (0.8,))
        assert nms([b, a], 0, 0.5, 10) == [a]

    def test_disjoint_kept(self):
        a = make_det((0, 0, 10, 10), (0.9,))
        b = make_det((20, 20, 30, 30), (0.8,))
        assert nms([a, b], 0, 0.5, 10) == [a, b]
        assert nms([a, b], 0, 0.5, 1) == [a]

    def test_threshold_range(self):
        with pytest.raises(InputError):
            nms([], 0, 1.5, 10)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_naive_greedy(self, seed):
        """Test 30 random boxes against the O(n^2) reference"""
        rng = np.random.default_rng(seed)
        dets = [
            make_det(b.as_list(), (float(s),))
            for b, s in zip(random_boxes(rng, 30), rng.random(30))
        ]
        assert nms(dets, 0, 0.45, 10) == _naive_nms(dets, 0, 0.45, 10)

    def test_all_classes(self):
        """Test each class is suppressed over its own positive scores"""
        dets = [
            make_det((0, 0, 10, 10), (0.9, 0.0)),
            make_det((0, 0, 10, 10), (0.7, 0.0)),
            make_det((1, 1, 10, 10), (0.0, 0.6)),
        ]
        kept = nms_all_classes(dets, DetectConfig())
        assert kept == [dets[0], dets[2]]

    def test_all_classes_returns_dense_detection_once(self):
        det = make_det((0, 0, 10, 10), (0.9, 0.8))
        assert nms_all_classes([det], DetectConfig()) == [det]


class TestDetectFrame:
    """Test decoding followed by per-class suppression"""

    def _two_peaks(self):
        """Two class-0 peaks whose boxes (8,17,28,27) and (16,17,36,27) overlap with IoU 3/7"""
        center, size, offset = empty_maps()
        center[5, 4, 0] = 0.9
        center[5, 6, 0] = 0.8
        size[5, 4] = size[5, 6] = (20, 10)
        offset[5, 4] = offset[5, 6] = (0.5, 0.5)
        return HeatmapSet(center, size, offset, down_ratio=4, width=64, height=64)

    def test_nms_threshold_applies(self):
        heatmaps = self._two_peaks()
        assert len(decode_heatmaps(heatmaps)) == 2
        (kept,) = detect_frame(heatmaps, DetectConfig(nms_iou=0.4))
        assert kept.box == Box(8, 17, 28, 27)
        assert len(detect_frame(heatmaps, DetectConfig(nms_iou=0.45))) == 2

    def test_top_n_applies(self):
        (kept,) = detect_frame(self._two_peaks(), DetectConfig(nms_iou=1.0, top_n=1))
        assert kept.scores == (0.9,)


class TestHeatmapFiles:
    """Test the binary heatmap format"""

    def test_write_then_read(self, tmp_path):
        heatmaps = random_heatmaps(3, grid=8, classes=2)
        path = tmp_path / "000000.bin"
        write_heatmap_file(heatmaps, path)
        back = read_heatmap_file(path, frame=4)
        assert back.frame == 4
        assert back.down_ratio == 4 and back.num_classes == 2
        assert np.allclose(back.center, heatmaps.center, atol=1e-6)
        assert np.allclose(back.size, heatmaps.size, atol=1e-4)

    def test_short_file(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x00" * 10)
        with pytest.raises(ParseError):
            read_heatmap_file(path)

    def test_wrong_length(self, tmp_path):
        path = tmp_path / "bad.bin"
        write_heatmap_file(random_heatmaps(0, grid=4, classes=1), path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ParseError):
            read_heatmap_file(path)

    def test_directory_in_frame_order(self, tmp_path):
        for t in (10, 2):
            write_heatmap_file(random_heatmaps(t, grid=4, classes=1), tmp_path / f"{t:06d}.bin")
        (tmp_path / "notes.txt").write_text("skip")
        assert [h.frame for h in iter_heatmap_dir(tmp_path)] == [2, 10]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(InputError):
            list(iter_heatmap_dir(tmp_path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_heatmap_file(tmp_path / "000000.bin")
