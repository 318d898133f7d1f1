# tests/test_imaging.py
"""
Image handling:
- Tile extraction with white padding and the overlay channel
- Augmentation of displacement and grid targets
- Otsu auto-threshold
- Synthetic leaves and fixture directories
- PNG helpers used by the fixtures
"""

from __future__ import annotations
import pathlib
import tempfile
import unittest

import numpy as np
from pydantic import ValidationError

from leaf_pheno.errors import ConfigError, DegenerateInputError, NoForegroundError, SyntheticLeafError
from leaf_pheno.domain.imaging import (AugmentConfig, DisplacementSet, ImageRGB, SyntheticLeafParams, Tile,
                                       augment_tile, auto_threshold, extract_tile, generate_synthetic_leaf,
                                       leaf_seeds, write_fixtures)
from leaf_pheno.io.persistence import read_mask_png, read_png, read_prob_png16, write_prob_png16

SMALL = SyntheticLeafParams(height=256, width=256)


def _image(seed=0, h=40, w=50) -> ImageRGB:
    return ImageRGB(np.random.default_rng(seed).integers(0, 256, size=(h, w, 3)).astype(np.uint8))


def _jaccard(a, b) -> float:
    return float((a & b).sum() / max(1, (a | b).sum()))


class TestTiles(unittest.TestCase):

    def test_interior_tile_equals_crop(self):
        img = _image()
        tile = extract_tile(img, (20, 25), 16)
        np.testing.assert_allclose(tile.data, img.pixels[12:28, 17:33] / 255.0)
        self.assertEqual(tile.chw().shape, (3, 16, 16))

    def test_corner_tile_is_padded_white(self):
        img = _image()
        tile = extract_tile(img, (0, 0), 16)
        self.assertTrue(np.all(tile.data[:8] == 1.0), "rows above the image are white")
        self.assertTrue(np.all(tile.data[:, :8] == 1.0), "columns left of the image are white")
        np.testing.assert_allclose(tile.data[8:, 8:], img.pixels[:8, :8] / 255.0)

    def test_overlay_channel_marks_path(self):
        img = _image()
        tile = extract_tile(img, (20, 25), 32, overlay=[(20, 20), (20, 29)])
        self.assertEqual(tile.channels, 4)
        self.assertEqual(int(tile.data[..., 3].sum()), 10)

    def test_centre_outside_image(self):
        with self.assertRaises(DegenerateInputError):
            extract_tile(_image(), (40, 0), 16)

    def test_image_validation(self):
        with self.assertRaises(ConfigError):
            ImageRGB(np.zeros((4, 4, 3), np.uint8), dpi=0)
        with self.assertRaises(ConfigError):
            ImageRGB(np.zeros((4, 4), np.uint8))


class TestAugmentation(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(4)
        self.tile = Tile(rng.uniform(size=(9, 9, 4)), (10, 10))
        self.offsets = DisplacementSet(rng.normal(scale=3.0, size=(2, 12)))

    def test_identity_leaves_everything_alone(self):
        t, d = augment_tile(self.tile, self.offsets, np.random.default_rng(0), AugmentConfig.identity())
        np.testing.assert_array_equal(t.data, self.tile.data)
        np.testing.assert_array_equal(d.offsets, self.offsets.offsets)

    def test_horizontal_flip_negates_columns(self):
        cfg = AugmentConfig.identity().model_copy(update={"flip_h": True})
        flipped = 0
        for seed in range(12):
            t, d = augment_tile(self.tile, self.offsets, np.random.default_rng(seed), cfg)
            np.testing.assert_array_equal(d.offsets[0], self.offsets.offsets[0])
            if np.array_equal(d.offsets[1], -self.offsets.offsets[1]):
                flipped += 1
                np.testing.assert_array_equal(t.data, self.tile.data[:, ::-1])
            else:
                np.testing.assert_array_equal(t.data, self.tile.data)
        self.assertGreater(flipped, 0, "twelve seeds should flip at least once")

    def test_rotation_preserves_offset_norms(self):
        cfg = AugmentConfig.identity().model_copy(update={"rotate": True})
        _, d = augment_tile(self.tile, self.offsets, np.random.default_rng(1), cfg)
        np.testing.assert_allclose(np.linalg.norm(d.offsets, axis=0),
                                   np.linalg.norm(self.offsets.offsets, axis=0), atol=1e-9)

    def test_quarter_turns_permute_grid_targets(self):
        cfg = AugmentConfig.identity().model_copy(update={"rotate": True})
        grid = np.arange(9.0).reshape(3, 3)
        seen = set()
        for seed in range(16):
            t, g = augment_tile(self.tile, grid, np.random.default_rng(seed), cfg)
            k = next((k for k in range(4) if np.array_equal(g, np.rot90(grid, k))), None)
            self.assertIsNotNone(k, "grid target must be a right-angle rotation of the input")
            np.testing.assert_array_equal(t.data, np.rot90(self.tile.data, k, axes=(0, 1)))
            seen.add(k)
        self.assertGreater(len(seen), 1)

    def test_colour_and_blur_skip_overlay_channel(self):
        cfg = AugmentConfig(rotate=False, flip_h=False, flip_v=False, jitter_px=0)
        t, _ = augment_tile(self.tile, None, np.random.default_rng(2), cfg)
        np.testing.assert_array_equal(t.data[..., 3], self.tile.data[..., 3])
        self.assertTrue(np.all((t.data >= 0.0) & (t.data <= 1.0)))

    def test_blur_range_validation(self):
        with self.assertRaises(ValidationError):
            AugmentConfig(blur_sigma=(1.0, 0.5))


class TestAutoThreshold(unittest.TestCase):

    def _two_level(self) -> tuple:
        px = np.full((40, 40, 3), 250, np.uint8)
        dark = np.zeros((40, 40), bool); dark[10:25, 12:30] = True
        px[dark] = 60
        return px, dark

    def test_two_level_image(self):
        px, dark = self._two_level()
        np.testing.assert_array_equal(auto_threshold(ImageRGB(px)), dark)

    def test_all_white_scan(self):
        with self.assertRaises(NoForegroundError):
            auto_threshold(ImageRGB(np.full((10, 10, 3), 255, np.uint8)))

    def test_white_border_does_not_move_mask(self):
        px, dark = self._two_level()
        padded = np.pad(px, ((20, 20), (20, 20), (0, 0)), constant_values=250)
        mask = auto_threshold(ImageRGB(padded))
        np.testing.assert_array_equal(mask[20:60, 20:60], dark)
        self.assertEqual(int(mask.sum()), int(dark.sum()))


class TestSyntheticLeaves(unittest.TestCase):

    def test_same_seed_same_leaf(self):
        a = generate_synthetic_leaf(np.random.default_rng(7), SMALL)
        b = generate_synthetic_leaf(np.random.default_rng(7), SMALL)
        np.testing.assert_array_equal(a.image.pixels, b.image.pixels)
        np.testing.assert_array_equal(a.vein_mask, b.vein_mask)
        self.assertEqual(a.petiole, b.petiole)
        self.assertEqual(leaf_seeds(3, 4), leaf_seeds(3, 4))

    def test_ground_truth_is_consistent(self):
        leaf = generate_synthetic_leaf(np.random.default_rng(11), SMALL)
        self.assertTrue(leaf.petiole.present)
        petiole = leaf.vein_mask & ~leaf.leaf_mask
        self.assertEqual(int(np.nonzero(petiole.any(axis=1))[0].min()), leaf.petiole.top_row)
        self.assertEqual(int(petiole.any(axis=1).sum()), leaf.petiole.length_px)
        self.assertEqual(leaf.contour[0], leaf.apex)
        self.assertGreater(int((leaf.vein_mask & leaf.leaf_mask).sum()), 0)

    def test_auto_threshold_recovers_leaf(self):
        leaf = generate_synthetic_leaf(np.random.default_rng(5), SMALL)
        truth = leaf.leaf_mask | leaf.vein_mask
        self.assertGreaterEqual(_jaccard(auto_threshold(leaf.image), truth), 0.9)

    def test_petiole_can_be_switched_off(self):
        params = SMALL.model_copy(update={"petiole_length": (0, 0)})
        leaf = generate_synthetic_leaf(np.random.default_rng(1), params)
        self.assertFalse(leaf.petiole.present)
        self.assertFalse((leaf.vein_mask & ~leaf.leaf_mask).any())

    def test_degenerate_parameters(self):
        with self.assertRaises(SyntheticLeafError):
            generate_synthetic_leaf(np.random.default_rng(0), SMALL.model_copy(update={"length_frac": (0.01, 0.01)}))
        with self.assertRaises(ValidationError):
            SyntheticLeafParams(width_ratio=(0.7, 0.5))
        with self.assertRaises(ValidationError):
            SyntheticLeafParams(height=100)

    def test_write_fixtures(self):
        with tempfile.TemporaryDirectory() as tmp:
            manifest = write_fixtures(tmp, 2, seed=3, params=SMALL)
            self.assertEqual(list(manifest["sample_id"]), ["leaf_000", "leaf_001"])
            root = pathlib.Path(tmp)
            self.assertTrue((root / "manifest.csv").is_file())
            img = read_png(root / "leaf_000_bottom.png", dpi=300.0)
            self.assertEqual(img.shape, (256, 256))
            self.assertEqual(read_mask_png(root / "leaf_001_veins.png").dtype, bool)


class TestPngHelpers(unittest.TestCase):

    def test_probability_png_quantisation(self):
        prob = np.linspace(0.0, 1.0, 64).reshape(8, 8)
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "p.png"
            write_prob_png16(path, prob)
            np.testing.assert_allclose(read_prob_png16(path), prob, atol=1.0 / 65535)


if __name__ == "__main__":
    unittest.main()
