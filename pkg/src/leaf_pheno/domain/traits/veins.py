"""Vein architecture traits over the veins inside the leaf body.

Every skeletal pixel gets a diameter from the distance transform and falls in
one of three diameter ranges; lengths, surface areas and volumes are summed
per range and overall, so the overall value is the sum of the three.
Vein pixels take the range of their nearest skeletal pixel.
"""
from __future__ import annotations
import logging
from typing import Dict, Tuple

import numpy as np
from scipy import ndimage
from skimage.measure import perimeter as mask_perimeter

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.morphology.geometry import convex_hull
from leaf_pheno.domain.morphology.skeleton import skeletonize, step_lengths
from .records import TraitRecord
from .units import ScaleFactors, px_to_units

log = logging.getLogger(__name__)

# Upper edges (mm) of the first two diameter ranges; a diameter on an edge belongs to the lower range.
RANGE_EDGES = (0.25, 0.80)
RANGES = ("dr1", "dr2", "dr3")

VEIN_UNITS: Dict[str, str] = {
    "vein_area_mm2": "mm2", **{f"vein_area_{r}_mm2": "mm2" for r in RANGES},
    "vein_avg_diameter_mm": "mm", "vein_max_diameter_mm": "mm",
    "vein_convex_area_mm2": "mm2", "vein_density": "unitless", "vein_length_to_area": "mm-1",
    "vein_max_width_mm": "mm", "vein_max_depth_mm": "mm", "vein_width_to_depth": "unitless",
    "vein_network_solidity": "unitless", "vein_perimeter_mm": "mm",
    "vein_surface_area_mm2": "mm2", **{f"vein_surface_area_{r}_mm2": "mm2" for r in RANGES},
    "vein_total_length_mm": "mm", **{f"vein_total_length_{r}_mm": "mm" for r in RANGES},
    "vein_volume_mm3": "mm3", **{f"vein_volume_{r}_mm3": "mm3" for r in RANGES},
    "vein_third_order_fraction": "unitless",
}


def diameter_range(diameter_mm: np.ndarray) -> np.ndarray:
    """0, 1, 2 for the thin, middle and thick ranges."""
    return np.searchsorted(np.asarray(RANGE_EDGES), np.asarray(diameter_mm), side="left")


def _nearest_index(skel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, (ri, ci) = ndimage.distance_transform_edt(~skel, return_indices=True)
    return ri, ci


def vein_traits(vein_mask: np.ndarray, leaf_mask: np.ndarray, dpi: float, sample_id: str = "") -> TraitRecord:
    scale = px_to_units(dpi)
    leaf = np.asarray(leaf_mask, dtype=bool)
    veins = np.asarray(vein_mask, dtype=bool)
    if veins.shape != leaf.shape:
        raise DegenerateInputError(f"vein mask {veins.shape} does not match leaf mask {leaf.shape}")
    if not leaf.any():
        raise EmptyMaskError("leaf mask is empty")
    veins = veins & leaf
    rec = TraitRecord(sample_id, scale.dpi)
    if not veins.any():
        rec.add_null(VEIN_UNITS, VEIN_UNITS, "no vein pixels")
        return rec

    sk = skeletonize(veins)
    mm = scale.mm_per_px
    diam = 2.0 * sk.radius[sk.mask] * mm
    steps = step_lengths(sk.mask)[sk.mask] * mm
    bucket = diameter_range(diam)

    # projected area per range through the nearest skeletal pixel
    ri, ci = _nearest_index(sk.mask)
    bucket_map = np.full(veins.shape, -1, dtype=np.int64)
    bucket_map[sk.mask] = bucket
    owner = bucket_map[ri, ci][veins]
    area_px = np.bincount(owner, minlength=3)

    length = np.bincount(bucket, weights=steps, minlength=3)
    surface = np.bincount(bucket, weights=steps * np.pi * diam, minlength=3)
    volume = np.bincount(bucket, weights=steps * np.pi * (diam / 2.0) ** 2, minlength=3)
    total_length = float(length.sum())

    n_vein, n_leaf = int(veins.sum()), int(leaf.sum())
    rows, cols = np.nonzero(veins)
    width = float(cols.max() - cols.min() + 1) * mm
    depth = float(rows.max() - rows.min() + 1) * mm
    hull = convex_hull(veins)

    rec.add("vein_area_mm2", n_vein * scale.mm2_per_px, "mm2")
    rec.add("vein_avg_diameter_mm", float(diam.mean()), "mm")
    rec.add("vein_max_diameter_mm", float(diam.max()), "mm")
    rec.add("vein_convex_area_mm2", hull.pixel_area * scale.mm2_per_px, "mm2")
    rec.add("vein_density", n_vein / n_leaf)
    rec.add("vein_length_to_area", total_length / (n_leaf * scale.mm2_per_px), "mm-1")
    rec.add("vein_max_width_mm", width, "mm")
    rec.add("vein_max_depth_mm", depth, "mm")
    rec.add("vein_width_to_depth", width / depth)
    rec.add("vein_network_solidity", n_vein / hull.pixel_area)
    rec.add("vein_perimeter_mm", float(mask_perimeter(veins, neighborhood=8)) * mm, "mm")
    rec.add("vein_total_length_mm", total_length, "mm")
    rec.add("vein_surface_area_mm2", float(surface.sum()), "mm2")
    rec.add("vein_volume_mm3", float(volume.sum()), "mm3")
    for k, r in enumerate(RANGES):
        rec.add(f"vein_area_{r}_mm2", area_px[k] * scale.mm2_per_px, "mm2")
        rec.add(f"vein_total_length_{r}_mm", float(length[k]), "mm")
        rec.add(f"vein_surface_area_{r}_mm2", float(surface[k]), "mm2")
        rec.add(f"vein_volume_{r}_mm3", float(volume[k]), "mm3")
    rec.add("vein_third_order_fraction", float(length[2]) / total_length if total_length > 0 else 0.0)
    log.debug("[traits] %s veins: %d px, length %.2f mm", sample_id, n_vein, total_length)
    return rec
