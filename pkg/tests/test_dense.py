# tests/test_dense.py
"""
Tiled encoder-decoder baseline:
- Window offsets cover both axes
- Oracle windows reassemble the ground truth exactly
- Leaf and vein thresholds
- Training windows respect the foreground rejection rule
"""

from __future__ import annotations
import unittest

import numpy as np

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.dense import OracleDense, make_dense_training_set, predict_tiled, segment_dense, tile_starts
from leaf_pheno.domain.imaging import ImageRGB, SyntheticLeafParams, generate_synthetic_leaf

SMALL = SyntheticLeafParams(height=256, width=256)


class TestTiling(unittest.TestCase):

    def test_tile_starts(self):
        self.assertEqual(tile_starts(100, 32, 16), [0, 16, 32, 48, 64, 68])
        self.assertEqual(tile_starts(64, 64, 32), [0])
        self.assertEqual(tile_starts(96, 32, 32), [0, 32, 64])

    def test_oracle_reassembles_ground_truth(self):
        leaf = generate_synthetic_leaf(np.random.default_rng(1), SMALL)
        res = predict_tiled(OracleDense(leaf.leaf_mask), leaf.image, window=48)
        np.testing.assert_array_equal(res.prob, leaf.leaf_mask.astype(float))
        self.assertGreaterEqual(int(res.coverage.min()), 1)

    def test_window_larger_than_image(self):
        img = ImageRGB(np.zeros((20, 20, 3), np.uint8))
        with self.assertRaises(DegenerateInputError):
            predict_tiled(OracleDense(np.zeros((20, 20))), img, window=32)


class TestSegmentation(unittest.TestCase):

    def setUp(self):
        self.leaf = generate_synthetic_leaf(np.random.default_rng(2), SMALL)

    def test_leaf_task_uses_fixed_threshold(self):
        seg = segment_dense(OracleDense(self.leaf.leaf_mask), self.leaf.image, "leaf", window=64)
        self.assertEqual(seg.threshold, 0.5)
        np.testing.assert_array_equal(seg.mask, self.leaf.leaf_mask)

    def test_vein_task_sweeps_grid(self):
        seg = segment_dense(OracleDense(self.leaf.vein_mask), self.leaf.image, "vein", window=64)
        self.assertEqual(seg.threshold, 0.05)
        np.testing.assert_array_equal(seg.mask, self.leaf.vein_mask)


class TestTrainingWindows(unittest.TestCase):

    def test_rejection_rule(self):
        leaf = generate_synthetic_leaf(np.random.default_rng(3), SMALL)
        samples = make_dense_training_set(leaf.image, leaf.vein_mask, 32, 12, np.random.default_rng(0),
                                          reject_mask=leaf.leaf_mask)
        self.assertEqual(len(samples), 12)
        for tile, target in samples:
            self.assertEqual(target.shape, (1, 32, 32))
            r0, c0 = tile.center[0] - 16, tile.center[1] - 16
            self.assertGreaterEqual(leaf.leaf_mask[r0:r0 + 32, c0:c0 + 32].mean(), 0.25)
            np.testing.assert_array_equal(target[0], leaf.vein_mask[r0:r0 + 32, c0:c0 + 32])

    def test_shortfall_is_logged(self):
        img = ImageRGB(np.zeros((64, 64, 3), np.uint8))
        guide = np.zeros((64, 64), bool); guide[0, 0] = True
        with self.assertLogs("leaf_pheno.domain.dense.baseline", "WARNING") as logs:
            samples = make_dense_training_set(img, guide, 16, 5, np.random.default_rng(0))
        self.assertEqual(samples, [])
        self.assertIn("only 0 of 5", logs.output[0])

    def test_empty_guide(self):
        img = ImageRGB(np.zeros((40, 40, 3), np.uint8))
        with self.assertRaises(EmptyMaskError):
            make_dense_training_set(img, np.zeros((40, 40), bool), 16, 4, np.random.default_rng(0))


if __name__ == "__main__":
    unittest.main()
