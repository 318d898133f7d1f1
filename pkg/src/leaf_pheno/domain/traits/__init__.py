"""Leaf, vein and petiole traits in physical units."""
from typing import Optional

import numpy as np

from leaf_pheno.domain.imaging.image import ImageRGB
from .leaf import LEAF_UNITS, colour_means, leaf_traits, shape_traits
from .petiole import NO_PETIOLE, PETIOLE_UNITS, medial_path, petiole_mask, petiole_traits
from .records import TraitRecord, TraitValue, records_frame
from .units import ScaleFactors, px_to_units
from .veins import RANGE_EDGES, VEIN_UNITS, diameter_range, vein_traits


def extract_traits(sample_id: str, leaf_mask: np.ndarray, vein_mask: np.ndarray,
                   bottom: ImageRGB, top: Optional[ImageRGB] = None, dpi: Optional[float] = None) -> TraitRecord:
    """All leaf, vein and petiole traits of one sample as a single record."""
    dpi = dpi or bottom.dpi
    rec = leaf_traits(leaf_mask, top, bottom, dpi, sample_id)
    rec = rec.merge(vein_traits(vein_mask, leaf_mask, dpi, sample_id))
    return rec.merge(petiole_traits(vein_mask, leaf_mask, bottom, dpi, sample_id))
