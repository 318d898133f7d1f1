# tests/test_metrics.py
"""
Segmentation metrics and method comparison:
- Jaccard, recall, object counts
- r² of caliper fits and contour Hausdorff distance
- Tukey HSD compact letters
"""

from __future__ import annotations
import unittest

import numpy as np

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.stats.metrics import hausdorff, jaccard, object_counts, r_squared, recall, tukey_hsd


class TestMaskMetrics(unittest.TestCase):

    def test_jaccard(self):
        a = np.zeros((10, 10), bool); a[:, :6] = True
        b = np.zeros((10, 10), bool); b[:, 3:] = True
        self.assertAlmostEqual(jaccard(a, b), 30 / 100)
        self.assertEqual(jaccard(a, a), 1.0)
        self.assertEqual(jaccard(np.zeros((3, 3)), np.zeros((3, 3))), 1.0)
        with self.assertRaises(DegenerateInputError):
            jaccard(a, b[:5])

    def test_recall(self):
        gt = np.zeros((10, 10), bool); gt[2:4, :] = True
        pred = np.zeros_like(gt); pred[2, :] = True; pred[8, :] = True
        self.assertAlmostEqual(recall(pred, gt), 0.5)
        with self.assertRaises(EmptyMaskError):
            recall(pred, np.zeros_like(gt))

    def test_object_counts(self):
        m = np.zeros((6, 6), bool); m[0, 0] = m[1, 1] = m[4, 4] = True
        self.assertEqual(object_counts([m]), [2])
        self.assertEqual(object_counts([m], connectivity=4), [3])


class TestFitAndDistance(unittest.TestCase):

    def test_r_squared(self):
        x = np.arange(10.0)
        self.assertAlmostEqual(r_squared(x, 3 * x + 1), 1.0)
        rng = np.random.default_rng(0)
        noisy = r_squared(x, x + rng.normal(scale=3.0, size=10))
        self.assertTrue(0.0 <= noisy < 1.0)
        with self.assertRaises(DegenerateInputError):
            r_squared([1, 2], [1, 2])
        with self.assertRaises(DegenerateInputError):
            r_squared([1, 1, 1], [1, 2, 3])

    def test_hausdorff(self):
        square = [(0, 0), (0, 10), (10, 10), (10, 0)]
        moved = [(r + 3, c) for r, c in square]
        self.assertAlmostEqual(hausdorff(square, moved), 3.0)
        self.assertEqual(hausdorff(square, square), 0.0)
        with self.assertRaises(DegenerateInputError):
            hausdorff(square, [])


class TestTukey(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(1)
        self.low = rng.normal(10.0, 1.0, 12)
        self.low2 = rng.normal(10.1, 1.0, 12)
        self.high = rng.normal(20.0, 1.0, 12)

    def test_letters_follow_decreasing_mean(self):
        res = tukey_hsd([self.low, self.low2, self.high], names=["grower", "dense", "tracer"])
        self.assertEqual(res.letters, ["B", "B", "A"])
        self.assertEqual(len(res.pairs), 3)
        far = res.pairs[(res.pairs["group_a"] == "grower") & (res.pairs["group_b"] == "tracer")]
        self.assertTrue(bool(far["reject"].iloc[0]))

    def test_indistinguishable_groups_share_a_letter(self):
        res = tukey_hsd([self.low, self.low2])
        self.assertEqual(res.letters, ["A", "A"])

    def test_degenerate_inputs(self):
        with self.assertRaises(DegenerateInputError):
            tukey_hsd([self.low])
        with self.assertRaises(DegenerateInputError):
            tukey_hsd([[1.0, 1.0], [2.0, 2.0]])


if __name__ == "__main__":
    unittest.main()
