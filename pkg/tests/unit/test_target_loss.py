#!/usr/bin/env python3
"""Unit tests for target assignment and the imagewise AP loss."""

import os
import sys
import unittest

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from mono3d.geometry import iou2d, random_box_set  # noqa: E402
from mono3d.shared.errors import InputError  # noqa: E402
from mono3d.shared.schemas import Box2D, Box3D  # noqa: E402
from mono3d.target_loss import (  # noqa: E402
    assign_from_quality,
    assign_targets,
    image_ap,
    imagewise_ap,
    imagewise_ap_table,
    quality,
)


def car(cx=0.0, box2d=(100.0, 100.0, 200.0, 180.0)):
    x1, y1, x2, y2 = box2d
    return Box3D(cx=cx, cy=1.0, cz=20.0, l=3.9, w=1.6, h=1.5, box2d=Box2D(x1=x1, y1=y1, x2=x2, y2=y2))


class TestQuality(unittest.TestCase):
    """Tests for the IoU2D x gIoU3D quality score."""

    def test_identical_boxes(self):
        self.assertAlmostEqual(quality(car(), car()), 1.0, places=9)

    def test_identical_rotated_boxes(self):
        box = car().model_copy(update={"yaw": 0.3})
        self.assertAlmostEqual(quality(box, box), 1.0, places=9)

    def test_assignment_ignores_shared_yaw(self):
        for yaw in (0.0, 0.3, 0.9):
            gt = car().model_copy(update={"yaw": yaw})
            assignment = assign_targets([gt], [gt], beta=0.95)
            self.assertEqual(assignment.labels.tolist(), [1])

    def test_no_image_overlap(self):
        far = car(box2d=(300.0, 300.0, 350.0, 350.0))
        self.assertEqual(quality(car(), far), 0.0)

    def test_bounded_by_iou2d(self):
        boxes = random_box_set(20, seed=3)
        for b in boxes[:10]:
            for g in boxes[10:]:
                q = quality(b, g)
                self.assertGreaterEqual(q, 0.0)
                self.assertLessEqual(q, iou2d(b.box2d, g.box2d) + 1e-12)


class TestAssignment(unittest.TestCase):
    """Tests for best-box assignment."""

    def test_single_positive(self):
        assignment = assign_from_quality(np.array([[0.6]]), beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [1])
        self.assertEqual(assignment.matched_gt, [0])

    def test_below_threshold(self):
        assignment = assign_from_quality(np.array([[0.2]]), beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [0])
        self.assertEqual(assignment.matched_gt, [None])

    def test_argmax_box_only(self):
        assignment = assign_from_quality(np.array([[0.6], [0.5]]), beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [1, 0])

    def test_ties_go_to_lowest_index(self):
        assignment = assign_from_quality(np.array([[0.5], [0.5]]), beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [1, 0])

    def test_one_positive_per_gt(self):
        q = np.random.default_rng(0).uniform(0.0, 1.0, size=(12, 4))
        assignment = assign_from_quality(q, beta=0.3)
        self.assertLessEqual(int(assignment.labels.sum()), 4)
        for box in np.flatnonzero(assignment.labels):
            self.assertGreaterEqual(q[box, assignment.matched_gt[box]], 0.3)

    def test_invariant_to_quality_rescaling(self):
        q = np.random.default_rng(1).uniform(0.3, 1.0, size=(8, 3))
        base = assign_from_quality(q, beta=0.1)
        scaled = assign_from_quality(0.5 * q, beta=0.1)
        self.assertEqual(base.labels.tolist(), scaled.labels.tolist())

    def test_no_ground_truths(self):
        assignment = assign_targets([car(), car(cx=2.0)], [], beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [0, 0])

    def test_assign_targets_end_to_end(self):
        shifted = car(cx=0.3, box2d=(104.0, 100.0, 204.0, 180.0))
        off = car(cx=5.0, box2d=(250.0, 100.0, 330.0, 180.0))
        assignment = assign_targets([off, shifted], [car()], beta=0.3)
        self.assertEqual(assignment.labels.tolist(), [0, 1])

    def test_beta_range(self):
        with self.assertRaises(InputError):
            assign_targets([car()], [car()], beta=1.0)


class TestImagewiseAP(unittest.TestCase):
    """Tests for the per-image AP loss."""

    def test_perfect_ranking(self):
        self.assertEqual(imagewise_ap([[0.9, 0.8, 0.1]], [[1, 1, 0]]), 0.0)

    def test_positive_ranked_last(self):
        self.assertAlmostEqual(image_ap([0.9, 0.5, 0.1], [0, 0, 1]), 1.0 / 3.0, places=12)
        self.assertAlmostEqual(imagewise_ap([[0.9, 0.5, 0.1]], [[0, 0, 1]]), 2.0 / 3.0, places=12)

    def test_mean_over_images(self):
        loss = imagewise_ap([[0.9, 0.1], [0.9, 0.5, 0.1]], [[1, 0], [0, 0, 1]])
        self.assertAlmostEqual(loss, 1.0 / 3.0, places=12)

    def test_image_without_positives(self):
        self.assertEqual(image_ap([0.4, 0.2], [0, 0]), 1.0)

    def test_images_are_independent(self):
        other = [0.2, 0.7, 0.4]
        labels = [[1, 0, 0], [0, 1, 1]]
        before = imagewise_ap([[0.9, 0.1, 0.5], other], labels)
        after = imagewise_ap([[0.9, 0.8, 0.6], other], labels)
        # image 0 keeps AP 1 whatever the negatives do below its positive
        self.assertAlmostEqual(before, after, places=12)
        self.assertAlmostEqual(image_ap(other, labels[1]), 1.0, places=12)

    def test_length_mismatch(self):
        with self.assertRaises(InputError):
            image_ap([0.9, 0.1], [1])
        with self.assertRaises(InputError):
            imagewise_ap([[0.9]], [])

    def test_table_ranks(self):
        rows = imagewise_ap_table([[0.2, 0.9, 0.5]], [[1, 0, 0]])
        self.assertEqual([row["rank"] for row in rows], [3, 1, 2])
        self.assertTrue(all(abs(row["per_image_ap"] - 1.0 / 3.0) < 1e-12 for row in rows))


if __name__ == "__main__":
    unittest.main()
