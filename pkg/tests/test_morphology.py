# tests/test_morphology.py
"""
Binary-image primitives:
- Connected components and connectivity
- Outer contour following and interior fill
- Distance transform and skeleton
- Hull, moment ellipse, Feret diameters and minimum-area rectangle
"""

from __future__ import annotations
import math
import unittest

import numpy as np
from scipy import ndimage
from skimage.draw import disk, ellipse, polygon

from leaf_pheno.errors import ContourError, EmptyMaskError
from leaf_pheno.domain.morphology import (chain_length, connected_components, convex_hull, densify,
                                          distance_transform, feret_diameters, fill_interior,
                                          fit_ellipse_moments, largest_component, min_area_rect, skeletonize,
                                          step_lengths, trace_outer_contour)


def _disk(r: float, size: int = 0) -> np.ndarray:
    size = size or int(2 * r + 10)
    m = np.zeros((size, size), dtype=bool)
    rr, cc = disk((size // 2, size // 2), r, shape=m.shape)
    m[rr, cc] = True
    return m


def _rect(h: int, w: int, pad: int = 4) -> np.ndarray:
    m = np.zeros((h + 2 * pad, w + 2 * pad), dtype=bool)
    m[pad:pad + h, pad:pad + w] = True
    return m


class TestComponents(unittest.TestCase):

    def test_full_and_empty(self):
        self.assertEqual(connected_components(np.ones((5, 5), bool))[1], 1)
        self.assertEqual(connected_components(np.zeros((5, 5), bool))[1], 0)

    def test_diagonal_pixels_depend_on_connectivity(self):
        m = np.zeros((4, 4), bool); m[1, 1] = m[2, 2] = True
        self.assertEqual(connected_components(m, 4)[1], 2)
        self.assertEqual(connected_components(m, 8)[1], 1)

    def test_labels_follow_raster_order(self):
        m = np.zeros((5, 5), bool); m[0, 4] = True; m[3, 0] = True
        labels, _ = connected_components(m)
        self.assertEqual(labels[0, 4], 1)
        self.assertEqual(labels[3, 0], 2)

    def test_count_invariant_under_translation(self):
        m = _disk(6, 30); m[2:4, 2:4] = True
        moved = np.roll(np.roll(m, 3, 0), -2, 1)
        self.assertEqual(connected_components(m)[1], connected_components(moved)[1])

    def test_largest_component(self):
        m = np.zeros((10, 10), bool); m[0, 0] = True; m[5:8, 5:8] = True
        self.assertEqual(int(largest_component(m).sum()), 9)


class TestContours(unittest.TestCase):

    def test_square_has_eight_point_contour(self):
        m = np.zeros((5, 5), bool); m[1:4, 1:4] = True
        contour = trace_outer_contour(m)
        self.assertEqual(len(contour), 8)
        self.assertEqual(contour[0], (1, 1))
        for (r0, c0), (r1, c1) in zip(contour, contour[1:] + contour[:1]):
            self.assertLessEqual(max(abs(r0 - r1), abs(c0 - c1)), 1)

    def test_single_pixel(self):
        m = np.zeros((3, 3), bool); m[1, 1] = True
        self.assertEqual(trace_outer_contour(m), [(1, 1)])

    def test_component_count_must_be_one(self):
        with self.assertRaises(ContourError):
            trace_outer_contour(np.zeros((4, 4), bool))
        m = np.zeros((6, 6), bool); m[0, 0] = m[4, 4] = True
        with self.assertRaises(ContourError):
            trace_outer_contour(m)

    def test_disk_contour_visits_every_boundary_pixel(self):
        m = _disk(50)
        contour = trace_outer_contour(m)
        boundary = m & ~ndimage.binary_erosion(m, ndimage.generate_binary_structure(2, 1))
        self.assertEqual(set(contour), set(map(tuple, np.argwhere(boundary).tolist())))
        self.assertAlmostEqual(chain_length(contour), 2 * math.pi * 50, delta=0.05 * 2 * math.pi * 50)

    def test_fill_square_contour(self):
        s = 10
        corners = [(2, 2), (2, 2 + s - 1), (2 + s - 1, 2 + s - 1), (2 + s - 1, 2)]
        filled = fill_interior(densify(corners, closed=True), (20, 20))
        self.assertEqual(int(filled.sum()), s * s)

    def test_fill_round_trip_has_no_holes(self):
        m = _disk(20)
        filled = fill_interior(trace_outer_contour(m), m.shape)
        np.testing.assert_array_equal(filled, m)
        self.assertEqual(connected_components(~filled, 4)[1], 1)

    def test_open_contour_is_rejected(self):
        with self.assertRaises(ContourError):
            fill_interior([(0, 0), (0, 1), (0, 2), (0, 3)], (5, 5))


class TestDistanceAndSkeleton(unittest.TestCase):

    def test_lone_pixel(self):
        m = np.zeros((5, 5), bool); m[2, 2] = True
        self.assertEqual(distance_transform(m)[2, 2], 1.0)

    def test_strip_centre(self):
        m = np.zeros((30, 60), bool); m[10:15, :] = True
        self.assertEqual(distance_transform(m)[12, 30], 3.0)

    def test_empty(self):
        self.assertFalse(distance_transform(np.zeros((4, 4), bool)).any())

    def test_lipschitz_between_neighbours(self):
        dt = distance_transform(_disk(15))
        self.assertLessEqual(np.abs(np.diff(dt, axis=0)).max(), 1.0 + 1e-12)
        self.assertLessEqual(np.abs(np.diff(dt, axis=1)).max(), 1.0 + 1e-12)

    def test_thin_line_unchanged(self):
        m = np.zeros((9, 30), bool); m[4, 3:27] = True
        np.testing.assert_array_equal(skeletonize(m).mask, m)

    def test_rectangle_medial_line(self):
        m = _rect(7, 60)
        sk = skeletonize(m)
        self.assertFalse((sk.mask & ~m).any())
        self.assertEqual(connected_components(sk.mask)[1], 1)
        rows = np.argwhere(sk.mask)[:, 0]
        self.assertTrue(np.all(np.abs(rows - (4 + 3)) <= 3))
        self.assertAlmostEqual(int(sk.mask.sum()), 60 - 7, delta=8)
        self.assertAlmostEqual(float(sk.radius[7, 30]), 4.0)

    def test_skeleton_keeps_component_count(self):
        m = np.zeros((40, 40), bool); m[5:15, 5:30] = True; m[25:35, 10:20] = True
        self.assertEqual(connected_components(skeletonize(m).mask)[1], 2)

    def test_step_lengths_count_every_link_once(self):
        m = np.zeros((5, 12), bool); m[2, 1:11] = True
        self.assertAlmostEqual(float(step_lengths(m).sum()), 9.0)
        d = np.eye(6, dtype=bool)
        self.assertAlmostEqual(float(step_lengths(d).sum()), 5 * math.sqrt(2))


class TestHullGeometry(unittest.TestCase):

    def test_rectangle_hull(self):
        m = _rect(10, 20)
        hull = convex_hull(m)
        self.assertEqual(hull.pixel_area, 200)
        self.assertAlmostEqual(hull.area, 200, delta=30)

    def test_l_shape_hull_exceeds_union(self):
        m = np.zeros((30, 30), bool); m[2:12, 2:12] = True; m[12:22, 2:12] = True; m[12:22, 12:22] = True
        self.assertGreater(convex_hull(m).pixel_area, int(m.sum()))

    def test_collinear_points(self):
        m = np.eye(5, dtype=bool)
        self.assertGreaterEqual(convex_hull(m).pixel_area, 5)

    def test_empty_mask_errors(self):
        for fn in (convex_hull, fit_ellipse_moments, feret_diameters, min_area_rect):
            with self.assertRaises(EmptyMaskError):
                fn(np.zeros((4, 4), bool))

    def test_ellipse_of_disk(self):
        e = fit_ellipse_moments(_disk(40))
        self.assertAlmostEqual(e.major, 80, delta=0.02 * 80)
        self.assertAlmostEqual(e.minor, 80, delta=0.02 * 80)

    def test_ellipse_aspect_ratio(self):
        m = np.zeros((80, 120), bool)
        rr, cc = ellipse(40, 60, 15, 30, shape=m.shape)
        m[rr, cc] = True
        e = fit_ellipse_moments(m)
        self.assertAlmostEqual(e.major / e.minor, 2.0, delta=0.05)

    def test_single_pixel_ellipse(self):
        m = np.zeros((3, 3), bool); m[1, 1] = True
        e = fit_ellipse_moments(m)
        self.assertEqual((e.major, e.minor), (1.0, 1.0))

    def test_feret_square_disk_line(self):
        fmax, fmin = feret_diameters(_rect(20, 20))
        self.assertAlmostEqual(fmax, 20 * math.sqrt(2), delta=1.0)
        self.assertAlmostEqual(fmin, 20, delta=1.0)
        fmax, fmin = feret_diameters(_disk(30))
        self.assertAlmostEqual(fmax, 60, delta=1.5)
        self.assertAlmostEqual(fmin, 60, delta=1.5)
        line = np.zeros((3, 15), bool); line[1, 2:12] = True
        self.assertEqual(feret_diameters(line), (10.0, 1.0))

    def test_min_area_rect_axis_aligned_and_rotated(self):
        rect = min_area_rect(_rect(6, 200))
        self.assertAlmostEqual(rect.length, 200, delta=1.0)
        self.assertAlmostEqual(rect.width, 6, delta=1.0)
        t = math.radians(30)
        u = np.array([math.sin(t), math.cos(t)]); n = np.array([math.cos(t), -math.sin(t)])
        c = np.array([120.0, 130.0])
        corners = np.array([c - 100 * u - 3 * n, c + 100 * u - 3 * n, c + 100 * u + 3 * n, c - 100 * u + 3 * n])
        m = np.zeros((260, 260), bool)
        rr, cc = polygon(corners[:, 0], corners[:, 1], shape=m.shape)
        m[rr, cc] = True
        rot = min_area_rect(m)
        self.assertAlmostEqual(rot.length, 200, delta=1.5)
        self.assertAlmostEqual(rot.width, 6, delta=1.0)
        self.assertGreaterEqual(rot.length, rot.width)

    def test_disk_rectangle_is_square(self):
        rect = min_area_rect(_disk(25))
        self.assertAlmostEqual(rect.length, 50, delta=1.5)
        self.assertAlmostEqual(rect.width, 50, delta=1.5)

    def test_integer_scaling(self):
        small = _disk(10, 30)
        big = np.kron(small, np.ones((3, 3), dtype=bool))
        self.assertAlmostEqual(fit_ellipse_moments(big).major / fit_ellipse_moments(small).major, 3.0, delta=0.09)
        self.assertAlmostEqual(feret_diameters(big)[0] / feret_diameters(small)[0], 3.0, delta=0.09)


if __name__ == "__main__":
    unittest.main()
