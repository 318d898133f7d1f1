"""Petiole traits from the vein pixels left outside the leaf body.

Eighteen traits describe the petiole mask itself: the ten leaf shape traits,
the six bottom-scan colour means, volume and centre width. Length, the long
side of the best-fit rotated rectangle, is reported on top as
`petiole_length_cm`, so a petiole record carries nineteen values.
"""
from __future__ import annotations
import logging
from typing import Dict, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from leaf_pheno.errors import DegenerateInputError
from leaf_pheno.domain.imaging.image import ImageRGB
from leaf_pheno.domain.morphology.components import largest_component
from leaf_pheno.domain.morphology.geometry import min_area_rect
from leaf_pheno.domain.morphology.skeleton import Skeleton, skeletonize, step_lengths
from .leaf import COLOUR_CHANNELS, SHAPE_UNITS, colour_means, shape_traits
from .records import TraitRecord
from .units import px_to_units

log = logging.getLogger(__name__)

CENTRE_BAND = (0.4, 0.6)       # arc-position window for the width estimate
NO_PETIOLE = "no petiole found"

PETIOLE_UNITS: Dict[str, str] = {
    **{f"petiole_{k}": u for k, u in SHAPE_UNITS.items()},
    **{f"petiole_bottom_{ch}": "unitless" for ch in COLOUR_CHANNELS},
    "petiole_volume_mm3": "mm3", "petiole_width_cm": "cm", "petiole_length_cm": "cm",
}

_NEIGHBOURS = [(0, 1), (1, -1), (1, 0), (1, 1)]


def petiole_mask(vein_mask: np.ndarray, leaf_mask: np.ndarray) -> np.ndarray:
    """Largest 8-connected group of vein pixels outside the leaf."""
    veins = np.asarray(vein_mask, dtype=bool)
    leaf = np.asarray(leaf_mask, dtype=bool)
    if veins.shape != leaf.shape:
        raise DegenerateInputError(f"vein mask {veins.shape} does not match leaf mask {leaf.shape}")
    return largest_component(veins & ~leaf, 8)


def medial_path(skel_mask: np.ndarray) -> np.ndarray:
    """Pixels of the longest geodesic path through the skeleton, end to end.

    Two sweeps of Dijkstra over the 8-connected skeleton graph: the node
    farthest from an arbitrary start is one end, the node farthest from that
    is the other.
    """
    pix = np.argwhere(skel_mask)
    n = len(pix)
    if n <= 1:
        return pix
    index = -np.ones(skel_mask.shape, dtype=np.int64)
    index[pix[:, 0], pix[:, 1]] = np.arange(n)
    H, W = skel_mask.shape
    src, dst, w = [], [], []
    for dr, dc in _NEIGHBOURS:
        r2, c2 = pix[:, 0] + dr, pix[:, 1] + dc
        ok = (r2 >= 0) & (r2 < H) & (c2 >= 0) & (c2 < W)
        j = np.full(n, -1)
        j[ok] = index[r2[ok], c2[ok]]
        hit = j >= 0
        src.append(np.nonzero(hit)[0]); dst.append(j[hit])
        w.append(np.full(int(hit.sum()), float(np.hypot(dr, dc))))
    src, dst, w = np.concatenate(src), np.concatenate(dst), np.concatenate(w)
    graph = coo_matrix((w, (src, dst)), shape=(n, n)).tocsr()
    d0 = dijkstra(graph, directed=False, indices=0)
    a = int(np.argmax(np.where(np.isfinite(d0), d0, -1)))
    da, pred = dijkstra(graph, directed=False, indices=a, return_predecessors=True)
    b = int(np.argmax(np.where(np.isfinite(da), da, -1)))
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    return pix[path[::-1]]


def centre_width_px(sk: Skeleton, band=CENTRE_BAND) -> float:
    """Mean skeletal diameter over the central arc band of the medial path."""
    path = medial_path(sk.mask)
    radius = sk.radius[path[:, 0], path[:, 1]]
    if len(path) == 1:
        return float(2.0 * radius[0])
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(path, axis=0).T))])
    pos = arc / arc[-1]
    sel = (pos >= band[0]) & (pos <= band[1])
    if not sel.any():
        sel = np.abs(pos - 0.5) == np.abs(pos - 0.5).min()
    return float(2.0 * radius[sel].mean())


def petiole_traits(vein_mask: np.ndarray, leaf_mask: np.ndarray, image: Optional[ImageRGB], dpi: float,
                   sample_id: str = "") -> TraitRecord:
    scale = px_to_units(dpi)
    rec = TraitRecord(sample_id, scale.dpi)
    pet = petiole_mask(vein_mask, leaf_mask)
    if not pet.any():
        rec.add_null(PETIOLE_UNITS, PETIOLE_UNITS, NO_PETIOLE)
        log.info("[traits] %s: %s", sample_id, NO_PETIOLE)
        return rec

    shape = shape_traits(pet, scale)
    shape.pop("_convex_px")
    for name, (value, unit) in shape.items():
        rec.add(f"petiole_{name}", value, unit)
    if image is None:
        rec.add_null([f"petiole_bottom_{ch}" for ch in COLOUR_CHANNELS], PETIOLE_UNITS, "no bottom scan")
    else:
        for ch, v in colour_means(image, pet).items():
            rec.add(f"petiole_bottom_{ch}", v)

    sk = skeletonize(pet)
    r_mm = sk.radius[sk.mask] * scale.mm_per_px
    steps = step_lengths(sk.mask)[sk.mask] * scale.mm_per_px
    rec.add("petiole_volume_mm3", float(np.sum(steps * np.pi * r_mm ** 2)), "mm3")
    rec.add("petiole_width_cm", centre_width_px(sk) * scale.cm_per_px, "cm")
    rec.add("petiole_length_cm", min_area_rect(pet).length * scale.cm_per_px, "cm")
    return rec
