"""
Tests for peak detection, sub-pixel refinement, detector-head decoding, NMS
and the two-step localization entry point.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn as nn

sys.path.insert(0, str(Path(__file__).parent.parent))

from spectrum_guard.models import DetectionBox, DetectorHeadSpec, DetectorThresholds, Transmitter
from spectrum_guard.utilities.detection import (
    box_iou,
    decode_boxes,
    localize,
    non_max_suppression,
    peaks_to_locations,
    remove_authorized,
    simple_peak_detect,
    subpixel_refine,
    target_boxes,
)
from spectrum_guard.utilities.encoding import render_label


def brute_force_peaks(image: np.ndarray, x: float, r: int):
    """All-pairs local-maximum oracle with lexicographic tie-breaking."""
    rows, cols = image.shape
    found = []
    for i in range(rows):
        for j in range(cols):
            value = image[i, j]
            if value <= x:
                continue
            keep = True
            for a in range(max(0, i - r), min(rows, i + r + 1)):
                for b in range(max(0, j - r), min(cols, j + r + 1)):
                    if image[a, b] > value or (image[a, b] == value and (a, b) < (i, j)):
                        keep = False
            if keep:
                found.append((i, j))
    return found


def empty_head(spec: DetectorHeadSpec = DetectorHeadSpec()) -> np.ndarray:
    head = np.zeros((spec.grid, spec.grid, spec.num_anchors, spec.values_per_anchor))
    head[..., 4] = -50.0
    return head


class Identity2d(nn.Module):
    """Translation stand-in returning its input."""

    def __init__(self):
        super().__init__()
        self.anchor = nn.Parameter(torch.zeros(1))

    def forward(self, x):
        return x[:, :1]


class TestSimplePeak:
    """Tests for local-maximum detection."""

    def test_empty_image(self):
        """Test an all-zero image has no peaks."""
        assert simple_peak_detect(np.zeros((100, 100))) == []

    def test_single_rendered_peak(self):
        """Test one rendered peak is found at its apex cell."""
        label = render_label([Transmitter(x=40.3, y=61.8, power=0.0)])
        assert simple_peak_detect(label) == [(40, 61)]

    def test_close_apexes(self):
        """Test of two apexes two cells apart only the taller survives."""
        image = np.zeros((20, 20))
        image[10, 10] = 10.0
        image[10, 12] = 9.0
        assert simple_peak_detect(image) == [(10, 10)]

    def test_plateau_tie(self):
        """Test equal neighbors resolve to the lowest (row, col)."""
        image = np.zeros((20, 20))
        image[5, 6] = image[6, 5] = 7.0
        assert simple_peak_detect(image) == [(5, 6)]

    def test_threshold_is_strict(self):
        """Test a peak exactly at the threshold is ignored."""
        image = np.zeros((10, 10))
        image[4, 4] = 2.0
        assert simple_peak_detect(image, x=2.0) == []

    def test_matches_brute_force_oracle(self):
        """Test agreement with the all-pairs oracle on random images, ties included."""
        rng = np.random.default_rng(0)
        for k in range(1000):
            if k % 2:
                image = rng.integers(0, 6, size=(16, 16)).astype(np.float64)
            else:
                image = rng.random((16, 16)) * 6
            assert simple_peak_detect(image, 2.0, 3) == brute_force_peaks(image, 2.0, 3)


class TestSubpixelRefine:
    """Tests for the weighted centroid."""

    def test_symmetric_peak(self):
        """Test a symmetric peak refines to the apex pixel center."""
        label = render_label([Transmitter(x=30.5, y=40.5, power=0.0)])
        assert subpixel_refine(label, (30, 40)) == pytest.approx((30.5, 40.5))

    def test_weighted_shift(self):
        """Test apex 10 with a right neighbor of 5 shifts x by one third."""
        image = np.zeros((10, 10))
        image[4, 4] = 10.0
        image[5, 4] = 5.0
        x, y = subpixel_refine(image, (4, 4))
        assert x == pytest.approx(4.5 + 1.0 / 3.0)
        assert y == pytest.approx(4.5)

    def test_negative_values_ignored(self):
        """Test negative neighbors get zero weight."""
        image = np.zeros((10, 10))
        image[4, 4] = 3.0
        image[3, 4] = -100.0
        assert subpixel_refine(image, (4, 4)) == pytest.approx((4.5, 4.5))

    def test_zero_neighborhood(self):
        """Test an all-zero neighborhood returns the cell center."""
        assert subpixel_refine(np.zeros((5, 5)), (2, 3)) == (2.5, 3.5)

    def test_peaks_to_locations(self):
        """Test rendered peaks come back close to their true locations."""
        truth = [(20.3, 20.7), (70.6, 35.2)]
        label = render_label([Transmitter(x=x, y=y, power=0.0) for x, y in truth])
        found = peaks_to_locations(label)
        assert len(found) == 2
        for (x, y), (tx, ty) in zip(found, truth):
            assert abs(x - tx) < 0.5 and abs(y - ty) < 0.5


class TestBoxes:
    """Tests for IoU, decoding and NMS."""

    def test_iou_examples(self):
        """Test identical boxes have IoU 1 and disjoint boxes 0."""
        a = np.array([[10.0, 10.0, 4.0, 4.0]])
        assert box_iou(a, a)[0, 0] == pytest.approx(1.0)
        assert box_iou(a, np.array([[50.0, 50.0, 4.0, 4.0]]))[0, 0] == 0.0

    def test_hand_computed_iou(self):
        """Test 20.8-squares offset by 6 px overlap with IoU about 0.552."""
        iou = box_iou(np.array([[50.0, 50.0, 20.8, 20.8]]), np.array([[56.0, 50.0, 20.8, 20.8]]))[0, 0]
        expected = (14.8 * 20.8) / (2 * 20.8 ** 2 - 14.8 * 20.8)
        assert iou == pytest.approx(expected)
        assert iou > 0.5

    def test_decode_center_cell(self):
        """Test zero offsets at cell (0, 0) with the middle anchor."""
        head = empty_head()
        head[0, 0, 1, 4:] = 10.0
        boxes = decode_boxes(head, DetectorThresholds(conf=0.5))
        assert len(boxes) == 1
        box = boxes[0]
        assert box.cx == pytest.approx(4 / 4.16)
        assert box.cy == pytest.approx(4 / 4.16)
        assert box.w == pytest.approx(25 / 4.16)
        assert box.confidence == pytest.approx((1 / (1 + np.exp(-10.0))) ** 2)

    def test_decode_rows_are_x(self):
        """Test the first grid axis maps to the x (row) coordinate."""
        head = empty_head()
        head[10, 3, 0, 4:] = 10.0
        box = decode_boxes(head, DetectorThresholds(conf=0.5))[0]
        assert box.cx == pytest.approx(10.5 * 8 / 4.16)
        assert box.cy == pytest.approx(3.5 * 8 / 4.16)

    def test_decode_drops_low_confidence(self):
        """Test a strongly negative objectness yields no boxes at any positive conf."""
        head = empty_head()
        head[..., 5] = 50.0
        assert decode_boxes(head, DetectorThresholds(conf=0.01)) == []

    def test_decode_conf_monotone(self):
        """Test raising conf shrinks the decoded set to a subset."""
        rng = np.random.default_rng(3)
        head = rng.normal(0, 3, size=(52, 52, 3, 6))
        low = {(b.cx, b.cy, b.w) for b in decode_boxes(head, DetectorThresholds(conf=0.5))}
        high = {(b.cx, b.cy, b.w) for b in decode_boxes(head, DetectorThresholds(conf=0.8))}
        assert high <= low and len(high) < len(low)

    def test_decode_shape_check(self):
        """Test a wrongly shaped head is rejected."""
        with pytest.raises(ValueError):
            decode_boxes(np.zeros((13, 13, 3, 6)))

    def test_decode_saturated_offsets_stay_in_field(self):
        """Test a saturated offset in the last cell still decodes inside the field."""
        head = empty_head()
        head[51, 51, 0, :2] = 1000.0
        head[51, 51, 0, 4:] = 10.0
        box = decode_boxes(head, DetectorThresholds(conf=0.5))[0]
        assert box.cx < 100.0 and box.cy < 100.0
        assert box.cx == pytest.approx(100.0)

    def test_box_center_must_lie_in_field(self):
        """Test a box centered on or past the field edge is rejected."""
        with pytest.raises(ValueError):
            DetectionBox(cx=100.0, cy=5.0, w=5.0, h=5.0, confidence=0.9, field_size=100)
        with pytest.raises(ValueError):
            DetectionBox(cx=5.0, cy=120.0, w=5.0, h=5.0, confidence=0.9, field_size=100)
        assert DetectionBox(cx=99.9, cy=0.0, w=5.0, h=5.0, confidence=0.9, field_size=100).center == (99.9, 0.0)

    def test_nms_identical(self):
        """Test identical boxes keep only the more confident one."""
        boxes = [
            DetectionBox(cx=10, cy=10, w=5, h=5, confidence=0.8),
            DetectionBox(cx=10, cy=10, w=5, h=5, confidence=0.9),
        ]
        kept = non_max_suppression(boxes, 0.5)
        assert [b.confidence for b in kept] == [0.9]

    def test_nms_disjoint(self):
        """Test disjoint boxes both survive."""
        boxes = [
            DetectionBox(cx=10, cy=10, w=5, h=5, confidence=0.8),
            DetectionBox(cx=60, cy=60, w=5, h=5, confidence=0.9),
        ]
        assert len(non_max_suppression(boxes, 0.5)) == 2

    def test_nms_hand_computed(self):
        """Test the 0.552-IoU pair suppresses the lower-confidence box."""
        boxes = [
            DetectionBox(cx=50, cy=50, w=20.8, h=20.8, confidence=0.95),
            DetectionBox(cx=56, cy=50, w=20.8, h=20.8, confidence=0.85),
        ]
        kept = non_max_suppression(boxes, 0.5)
        assert len(kept) == 1 and kept[0].confidence == 0.95
        assert len(non_max_suppression(boxes, 0.6)) == 2

    def test_nms_output_pairwise_iou(self):
        """Test surviving boxes never overlap above the threshold."""
        rng = np.random.default_rng(1)
        for _ in range(50):
            boxes = [
                DetectionBox(
                    cx=float(rng.uniform(0, 30)), cy=float(rng.uniform(0, 30)),
                    w=float(rng.uniform(2, 10)), h=float(rng.uniform(2, 10)),
                    confidence=float(rng.uniform())
                )
                for _ in range(30)
            ]
            kept = non_max_suppression(boxes, 0.5)
            coords = np.array([[b.cx, b.cy, b.w, b.h] for b in kept])
            iou = box_iou(coords, coords)
            np.fill_diagonal(iou, 0.0)
            assert np.all(iou <= 0.5)

    def test_target_boxes(self):
        """Test ground-truth boxes are 5x5 squares at the transmitters."""
        boxes = target_boxes([Transmitter(x=3.0, y=4.0, power=0.0)])
        np.testing.assert_array_equal(boxes, [[3.0, 4.0, 5.0, 5.0]])
        assert target_boxes([]).shape == (0, 4)


class TestLocalize:
    """Tests for the two-step entry point and authorized-user removal."""

    def test_simplepeak_variant(self):
        """Test the simplepeak route recovers rendered peaks through the translation step."""
        label = render_label([Transmitter(x=25.5, y=25.5, power=0.0), Transmitter(x=75.5, y=60.5, power=0.0)])
        found = localize(label, Identity2d(), variant="simplepeak")
        assert found == [pytest.approx((25.5, 25.5)), pytest.approx((75.5, 60.5))]

    def test_detector_variant_needs_detector(self):
        """Test the detector route without a detector is rejected."""
        with pytest.raises(ValueError):
            localize(np.zeros((100, 100)), Identity2d(), detector=None, variant="detector")

    def test_unknown_variant(self):
        """Test an unknown variant name is rejected."""
        with pytest.raises(ValueError):
            localize(np.zeros((100, 100)), Identity2d(), variant="hough")

    def test_remove_authorized(self):
        """Test the estimate nearest each authorized user is dropped."""
        estimates = [(10.0, 10.0), (11.0, 10.0), (50.0, 50.0)]
        remaining = remove_authorized(estimates, [(10.2, 10.0), (90.0, 90.0)], radius=5.0)
        assert remaining == [(11.0, 10.0), (50.0, 50.0)]
