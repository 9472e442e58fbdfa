#!/usr/bin/env python3
"""Unit tests for box overlap measures."""

import json
import math
import os
import sys
import unittest

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from mono3d.geometry import (  # noqa: E402
    bev_corners,
    dump_boxes,
    giou2d,
    giou3d,
    hull_volume,
    iou2d,
    iou3d,
    iou_bev,
    load_boxes,
    overlap_matrix,
    random_box_pairs,
    random_box_set,
    voxel_iou3d_oracle,
)
from mono3d.shared.errors import InputError  # noqa: E402
from mono3d.shared.schemas import Box2D, Box3D  # noqa: E402


def cube(cx=0.0, cy=0.0, cz=0.0, yaw=0.0, size=1.0):
    return Box3D(cx=cx, cy=cy, cz=cz, l=size, w=size, h=size, yaw=yaw)


class TestIou2D(unittest.TestCase):
    """Tests for image-box overlaps."""

    def setUp(self):
        self.a = Box2D(x1=0.0, y1=0.0, x2=2.0, y2=2.0)
        self.b = Box2D(x1=1.0, y1=1.0, x2=3.0, y2=3.0)

    def test_partial_overlap(self):
        self.assertAlmostEqual(iou2d(self.a, self.b), 1.0 / 7.0, places=12)

    def test_identical_boxes(self):
        self.assertEqual(iou2d(self.a, self.a), 1.0)

    def test_disjoint_boxes(self):
        far = Box2D(x1=10.0, y1=10.0, x2=11.0, y2=11.0)
        self.assertEqual(iou2d(self.a, far), 0.0)

    def test_degenerate_boxes(self):
        point = Box2D(x1=1.0, y1=1.0, x2=1.0, y2=1.0)
        self.assertEqual(iou2d(point, point), 0.0)

    def test_giou2d(self):
        # hull 9, union 7
        self.assertAlmostEqual(giou2d(self.a, self.b), 1.0 / 7.0 - 2.0 / 9.0, places=12)

    def test_translation_invariance(self):
        for dx, dy in [(3.0, -2.0), (150.5, 40.25)]:
            a, b = (Box2D(x1=p.x1 + dx, y1=p.y1 + dy, x2=p.x2 + dx, y2=p.y2 + dy) for p in (self.a, self.b))
            self.assertLessEqual(abs(iou2d(a, b) - iou2d(self.a, self.b)), 1e-12)

    def test_corner_order_rejected(self):
        with self.assertRaises(ValueError):
            Box2D(x1=2.0, y1=0.0, x2=1.0, y2=1.0)

    def test_overlap_matrix(self):
        far = Box2D(x1=10.0, y1=10.0, x2=11.0, y2=11.0)
        overlaps = overlap_matrix([self.a, self.b, far])
        self.assertEqual(overlaps.shape, (3, 3))
        np.testing.assert_allclose(overlaps, overlaps.T)
        np.testing.assert_allclose(np.diag(overlaps), 1.0)
        self.assertAlmostEqual(overlaps[0, 1], 1.0 / 7.0, places=12)
        self.assertEqual(overlaps[0, 2], 0.0)


class TestIou3D(unittest.TestCase):
    """Tests for IoU3D and gIoU3D."""

    def test_identical_boxes(self):
        box = Box3D(cx=1.0, cy=0.5, cz=10.0, l=3.9, w=1.6, h=1.5, yaw=0.3)
        self.assertAlmostEqual(iou3d(box, box), 1.0, places=9)
        self.assertAlmostEqual(giou3d(box, box), 1.0, places=9)

    def test_identical_boxes_at_any_yaw(self):
        for yaw in (0.0, 0.3, math.pi / 4.0, 1.2, -2.5):
            box = Box3D(cx=-2.0, cy=1.0, cz=25.0, l=3.9, w=1.6, h=1.5, yaw=yaw)
            self.assertAlmostEqual(giou3d(box, box), 1.0, places=9)

    def test_hull_ignores_yaw(self):
        a = Box3D(cx=0.0, cy=0.0, cz=0.0, l=4.0, w=2.0, h=1.0, yaw=0.7)
        b = a.model_copy(update={"cx": 3.0, "yaw": -0.2})
        self.assertAlmostEqual(hull_volume(a, b), 7.0 * 2.0 * 1.0, places=12)

    def test_disjoint_hand_case(self):
        a, b = cube(), cube(cx=2.0)
        self.assertEqual(iou3d(a, b), 0.0)
        self.assertAlmostEqual(giou3d(a, b), -1.0 / 3.0, places=9)

    def test_half_overlap(self):
        a, b = cube(), cube(cx=0.5)
        self.assertAlmostEqual(iou3d(a, b), 1.0 / 3.0, places=9)
        self.assertAlmostEqual(giou3d(a, b), 1.0 / 3.0, places=9)

    def test_vertical_offset(self):
        a, b = cube(), cube(cy=0.5)
        self.assertAlmostEqual(iou3d(a, b), 1.0 / 3.0, places=9)

    def test_quarter_turn_of_cube_is_identity(self):
        a, b = cube(), cube(yaw=math.pi / 2.0)
        self.assertAlmostEqual(iou3d(a, b), 1.0, places=9)

    def test_rotated_square_footprint(self):
        # octagon overlap of a square and itself turned by 45 degrees
        a, b = cube(), cube(yaw=math.pi / 4.0)
        inter = 2.0 * (math.sqrt(2.0) - 1.0)
        self.assertAlmostEqual(iou_bev(a, b), inter / (2.0 - inter), places=9)

    def test_bev_corners_unrotated(self):
        box = Box3D(cx=1.0, cy=0.0, cz=2.0, l=4.0, w=2.0, h=1.0)
        corners = bev_corners(box)
        np.testing.assert_allclose(corners[:, 0].min(), -1.0)
        np.testing.assert_allclose(corners[:, 0].max(), 3.0)
        np.testing.assert_allclose(corners[:, 1].min(), 1.0)
        np.testing.assert_allclose(corners[:, 1].max(), 3.0)

    def test_hull_volume_contains_both(self):
        a, b = cube(), cube(cx=2.0, yaw=0.4)
        self.assertGreaterEqual(hull_volume(a, b), a.volume + b.volume)

    def test_giou_bounded_by_iou(self):
        for a, b in random_box_pairs(100, seed=3):
            iou, giou = iou3d(a, b), giou3d(a, b)
            self.assertGreaterEqual(iou, 0.0)
            self.assertLessEqual(iou, 1.0)
            self.assertLessEqual(giou, iou + 1e-12)
            self.assertGreaterEqual(giou, -1.0)

    def test_symmetry(self):
        for a, b in random_box_pairs(50, seed=5):
            self.assertAlmostEqual(iou3d(a, b), iou3d(b, a), places=12)
            self.assertAlmostEqual(giou3d(a, b), giou3d(b, a), places=12)

    def test_translation_invariance(self):
        shift = {"cx": 2.5, "cy": -1.0, "cz": 7.0}
        for a, b in random_box_pairs(50, seed=11):
            moved = [box.model_copy(update={k: getattr(box, k) + d for k, d in shift.items()}) for box in (a, b)]
            self.assertLessEqual(abs(iou3d(*moved) - iou3d(a, b)), 1e-12)
            self.assertLessEqual(abs(giou3d(*moved) - giou3d(a, b)), 1e-12)


class TestVoxelOracle(unittest.TestCase):
    """Tests for the brute-force IoU3D."""

    def test_oracle_agrees_with_polygon_iou(self):
        gaps = [abs(iou3d(a, b) - voxel_iou3d_oracle(a, b, 64)) for a, b in random_box_pairs(200, seed=11)]
        self.assertLessEqual(max(gaps), 0.03)

    def test_oracle_exact_on_aligned_cubes(self):
        self.assertAlmostEqual(voxel_iou3d_oracle(cube(), cube(cx=0.5), 64), 1.0 / 3.0, places=9)

    def test_low_resolution_rejected(self):
        with self.assertRaises(InputError):
            voxel_iou3d_oracle(cube(), cube(), resolution=8)


class TestBoxIO(unittest.TestCase):
    """Tests for the JSON box interface."""

    def test_load_inline_json(self):
        text = json.dumps([{"cx": 0, "cy": 1, "cz": 10, "l": 4, "w": 2, "h": 1.5, "box2d": [1, 2, 3, 4]}])
        boxes = load_boxes(text)
        self.assertEqual(len(boxes), 1)
        self.assertEqual(boxes[0].box2d.x2, 3.0)
        self.assertEqual(boxes[0].score, 1.0)

    def test_malformed_json_reports_position(self):
        with self.assertRaises(InputError) as ctx:
            load_boxes('[{"cx": 0,\n  "cy": }]')
        self.assertIn("line 2", str(ctx.exception))
        self.assertIn("column", str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(InputError):
            load_boxes("/nonexistent/boxes.json")

    def test_invalid_record(self):
        with self.assertRaises(InputError):
            load_boxes('[{"cx": 0, "cy": 0, "cz": 0, "l": -1, "w": 1, "h": 1}]')

    def test_dump_reloads(self):
        boxes = random_box_set(5, seed=1)
        self.assertEqual(load_boxes(json.dumps(dump_boxes(boxes))), boxes)

    def test_random_sets_are_seeded(self):
        self.assertEqual(random_box_set(8, seed=4), random_box_set(8, seed=4))
        self.assertNotEqual(random_box_set(8, seed=4), random_box_set(8, seed=5))


@pytest.mark.parametrize("offset", [0.0, 0.25, 0.5, 0.75])
def test_axis_aligned_overlap_closed_form(offset):
    inter = 1.0 - offset
    expected = inter / (2.0 - inter)
    assert math.isclose(iou3d(cube(), cube(cx=offset)), expected, abs_tol=1e-9)


def test_unit_cube_overlaps_itself(unit_cube):
    assert iou3d(unit_cube, unit_cube) == pytest.approx(1.0)
    assert giou3d(unit_cube, unit_cube) == pytest.approx(1.0)


def test_shared_square(overlapping_boxes2d):
    a, b = overlapping_boxes2d
    assert iou2d(a, b) == pytest.approx(1.0 / 7.0)
    assert giou2d(a, b) == pytest.approx(1.0 / 7.0 - 2.0 / 9.0)


if __name__ == "__main__":
    unittest.main()
