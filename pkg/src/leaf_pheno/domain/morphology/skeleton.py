from __future__ import annotations
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _thin


@dataclass
class Skeleton:
    """Medial pixels of a mask and the distance-transform radius at each of them."""
    mask: np.ndarray
    radius: np.ndarray  # zero off the skeleton

    @property
    def pixels(self) -> np.ndarray:
        return np.argwhere(self.mask)


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance to the nearest background pixel; outside the image counts as background."""
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    if not m.any():
        return np.zeros(np.shape(mask))
    return ndimage.distance_transform_edt(m)[1:-1, 1:-1]


def skeletonize(mask: np.ndarray) -> Skeleton:
    m = np.asarray(mask, dtype=bool)
    skel = _thin(m) if m.any() else np.zeros_like(m)
    return Skeleton(skel, np.where(skel, distance_transform(m), 0.0))


def step_lengths(skel_mask: np.ndarray) -> np.ndarray:
    """Half of the summed 1 / sqrt(2) links from each skeletal pixel to its 8-neighbours.

    Summing the result over any set of skeletal pixels counts every link
    between them once, split evenly across its two ends.
    """
    s = np.asarray(skel_mask, dtype=np.float64)
    axial = ndimage.correlate(s, np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float), mode="constant")
    diag = ndimage.correlate(s, np.array([[1, 0, 1], [0, 0, 0], [1, 0, 1]], float), mode="constant")
    return np.where(s > 0, 0.5 * (axial + np.sqrt(2.0) * diag), 0.0)
