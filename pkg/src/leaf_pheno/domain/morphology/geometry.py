"""Hull-based shape descriptors of binary masks.

All extents follow the pixel convention that a single pixel spans 1 px: the
distance between pixel centres plus one.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist
from skimage.draw import line, polygon
from skimage.measure import regionprops

from leaf_pheno.errors import EmptyMaskError


@dataclass
class Hull:
    vertices: np.ndarray    # (k, 2) row/col of pixel centres, counter-clockwise
    area: float             # shoelace area of the centre polygon
    pixel_area: int         # rasterized pixels covered by hull and mask


@dataclass
class Ellipse:
    major: float
    minor: float
    orientation: float


@dataclass
class RotatedRect:
    length: float
    width: float
    angle: float            # direction of the long side, atan2(drow, dcol)


def _points(mask: np.ndarray) -> np.ndarray:
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMaskError("mask has no foreground pixels")
    return np.argwhere(m).astype(np.float64)


def _hull_vertices(pts: np.ndarray) -> np.ndarray:
    """Convex hull vertices; collinear or single-point sets collapse to their extreme points."""
    if len(pts) >= 3:
        try:
            h = ConvexHull(pts)
            return pts[h.vertices]
        except QhullError:
            pass
    if len(pts) == 1:
        return pts[:1]
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    t = centered @ vt[0]
    return pts[[int(np.argmin(t)), int(np.argmax(t))]]


def _shoelace(v: np.ndarray) -> float:
    if len(v) < 3:
        return 0.0
    r, c = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(r, np.roll(c, -1)) - np.dot(c, np.roll(r, -1))))


def convex_hull(mask: np.ndarray) -> Hull:
    m = np.asarray(mask, dtype=bool)
    v = _hull_vertices(_points(m))
    filled = m.copy()
    if len(v) >= 3:
        rr, cc = polygon(v[:, 0], v[:, 1], shape=m.shape)
        filled[rr, cc] = True
    closed = np.vstack([v, v[:1]]).astype(np.int64)
    for (r0, c0), (r1, c1) in zip(closed[:-1], closed[1:]):
        rr, cc = line(r0, c0, r1, c1)
        filled[rr, cc] = True
    return Hull(v, _shoelace(v), int(filled.sum()))


def fit_ellipse_moments(mask: np.ndarray) -> Ellipse:
    """Ellipse with the same second central moments as the mask; never thinner than 1 px."""
    m = np.asarray(mask, dtype=bool)
    _points(m)
    props = regionprops(m.astype(np.uint8))[0]
    major = max(float(props.axis_major_length), 1.0)
    minor = max(float(props.axis_minor_length), 1.0)
    return Ellipse(major, minor, float(props.orientation))


def _edge_frames(v: np.ndarray):
    """Unit direction and normal for every hull edge."""
    if len(v) < 2:
        return np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])
    e = np.roll(v, -1, axis=0) - v
    e = e[np.hypot(e[:, 0], e[:, 1]) > 0]
    u = e / np.hypot(e[:, 0], e[:, 1])[:, None]
    n = np.stack([-u[:, 1], u[:, 0]], axis=1)
    return u, n


def _spans(v: np.ndarray, axes: np.ndarray) -> np.ndarray:
    proj = v @ axes.T                        # (k, edges)
    return proj.max(axis=0) - proj.min(axis=0)


def feret_diameters(mask: np.ndarray) -> Tuple[float, float]:
    """(max, min) caliper widths; min is taken over hull edge directions."""
    v = _hull_vertices(_points(mask))
    fmax = float(pdist(v).max()) + 1.0 if len(v) > 1 else 1.0
    _, n = _edge_frames(v)
    fmin = float(_spans(v, n).min()) + 1.0 if len(v) > 1 else 1.0
    return fmax, min(fmin, fmax)


def min_area_rect(mask: np.ndarray) -> RotatedRect:
    """Smallest-area enclosing rectangle aligned with one hull edge."""
    v = _hull_vertices(_points(mask))
    u, n = _edge_frames(v)
    along = _spans(v, u) + 1.0
    across = _spans(v, n) + 1.0
    k = int(np.argmin(along * across))
    a, b = float(along[k]), float(across[k])
    d = u[k] if a >= b else n[k]
    return RotatedRect(max(a, b), min(a, b), float(np.arctan2(d[0], d[1])))
