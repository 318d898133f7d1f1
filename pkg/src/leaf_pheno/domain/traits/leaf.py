"""Whole-leaf morphology and colour traits."""
from __future__ import annotations
import math
from typing import Dict, Optional, Tuple

import numpy as np
from skimage.color import rgb2hsv

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.imaging.image import ImageRGB
from leaf_pheno.domain.morphology.components import chain_length, largest_component, trace_outer_contour
from leaf_pheno.domain.morphology.geometry import convex_hull, feret_diameters, fit_ellipse_moments
from .records import TraitRecord
from .units import ScaleFactors, px_to_units

COLOUR_CHANNELS = ("red", "green", "blue", "hue", "saturation", "brightness")

SHAPE_UNITS: Dict[str, str] = {
    "area_cm2": "cm2", "perimeter_cm": "cm", "circularity": "unitless", "solidity": "unitless",
    "major_axis_cm": "cm", "minor_axis_cm": "cm", "aspect_ratio": "unitless", "roundness": "unitless",
    "feret_max_cm": "cm", "feret_min_cm": "cm",
}

LEAF_UNITS: Dict[str, str] = {
    **SHAPE_UNITS, "convex_area_mm2": "mm2",
    **{f"{side}_{ch}": "unitless" for side in ("top", "bottom") for ch in COLOUR_CHANNELS},
}


def shape_traits(mask: np.ndarray, scale: ScaleFactors) -> Dict[str, Tuple[float, str]]:
    """Area, perimeter, hull, ellipse and caliper descriptors of one mask."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMaskError("mask has no foreground pixels")
    area = float(m.sum())
    perim = chain_length(trace_outer_contour(largest_component(m, 8)))
    perim = max(perim, 1.0)
    hull = convex_hull(m)
    ell = fit_ellipse_moments(m)
    fmax, fmin = feret_diameters(m)
    return {
        "area_cm2": (area * scale.cm2_per_px, "cm2"),
        "perimeter_cm": (perim * scale.cm_per_px, "cm"),
        "circularity": (4.0 * math.pi * area / perim ** 2, "unitless"),
        "solidity": (area / hull.pixel_area, "unitless"),
        "major_axis_cm": (ell.major * scale.cm_per_px, "cm"),
        "minor_axis_cm": (ell.minor * scale.cm_per_px, "cm"),
        "aspect_ratio": (ell.major / ell.minor, "unitless"),
        "roundness": (4.0 * area / (math.pi * ell.major ** 2), "unitless"),
        "feret_max_cm": (fmax * scale.cm_per_px, "cm"),
        "feret_min_cm": (fmin * scale.cm_per_px, "cm"),
        "_convex_px": (float(hull.pixel_area), "px"),
    }


def colour_means(image: ImageRGB, mask: np.ndarray) -> Dict[str, float]:
    """Mean 8-bit R, G, B and hexcone H, S, V (in [0, 1]) over the mask pixels."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != image.shape:
        raise DegenerateInputError(f"mask {m.shape} does not match image {image.shape}")
    px = image.pixels[m]
    hsv = rgb2hsv(px[None].astype(np.float64) / 255.0)[0]
    rgb = px.astype(np.float64).mean(axis=0)
    return {"red": float(rgb[0]), "green": float(rgb[1]), "blue": float(rgb[2]),
            "hue": float(hsv[:, 0].mean()), "saturation": float(hsv[:, 1].mean()),
            "brightness": float(hsv[:, 2].mean())}


def leaf_traits(leaf_mask: np.ndarray, image_top: Optional[ImageRGB], image_bottom: ImageRGB,
                dpi: float, sample_id: str = "") -> TraitRecord:
    scale = px_to_units(dpi)
    m = np.asarray(leaf_mask, dtype=bool)
    rec = TraitRecord(sample_id, scale.dpi)
    shape = shape_traits(m, scale)
    convex_px = shape.pop("_convex_px")[0]
    for name, (value, unit) in shape.items():
        rec.add(name, value, unit)
    rec.add("convex_area_mm2", convex_px * scale.mm2_per_px, "mm2")
    for side, img in (("top", image_top), ("bottom", image_bottom)):
        if img is None:
            rec.add_null([f"{side}_{ch}" for ch in COLOUR_CHANNELS], LEAF_UNITS, f"no {side} scan")
            continue
        for ch, v in colour_means(img, m).items():
            rec.add(f"{side}_{ch}", v)
    return rec
