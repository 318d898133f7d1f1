"""Synthetic scanned leaves with exact ground truth.

A leaf is a serrated ovate lamina with a recursive vein tree, a rectangular
(optionally tapering) petiole hanging below the base, and two scans of it:
the abaxial "bottom" side with dark veins and a lighter adaxial "top" side.
"""
from __future__ import annotations
import logging
import pathlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator
from scipy import ndimage
from skimage.draw import polygon

from leaf_pheno.errors import SyntheticLeafError
from leaf_pheno.domain.morphology.components import Contour, trace_outer_contour
from .image import DEFAULT_DPI, ImageRGB

log = logging.getLogger(__name__)

IntRange = Tuple[int, int]
FloatRange = Tuple[float, float]

# ---- colourways (RGB) ---------------------------------------------------------
BOTTOM_LAMINA = (72, 122, 58)
BOTTOM_VEIN = (38, 74, 30)
TOP_LAMINA = (104, 158, 74)
TOP_VEIN = (88, 140, 62)
BACKGROUND = 253
TEXTURE_SIGMA = 5.0


class SyntheticLeafParams(BaseModel):
    """Ranges are inclusive; equal ends pin a value."""
    height: int = Field(512, ge=256)
    width: int = Field(512, ge=256)
    dpi: float = Field(DEFAULT_DPI, gt=0)
    length_frac: FloatRange = (0.48, 0.62)     # lamina length / canvas height
    width_ratio: FloatRange = (0.50, 0.70)     # lamina width / lamina length
    teeth: IntRange = (18, 34)
    tooth_depth: FloatRange = (0.015, 0.035)   # fraction of local half-width
    midrib_width: IntRange = (8, 12)
    laterals: IntRange = (5, 8)
    branch_depth: int = Field(2, ge=0, le=4)
    petiole_length: IntRange = (80, 130)       # 0 renders no petiole
    petiole_width: IntRange = (5, 8)
    petiole_taper: Optional[FloatRange] = None  # (width at lamina, width at tip)

    @model_validator(mode="after")
    def _ranges(self) -> "SyntheticLeafParams":
        for name in ("length_frac", "width_ratio", "teeth", "tooth_depth", "midrib_width",
                     "laterals", "petiole_length", "petiole_width"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be an ascending nonnegative range")
        return self


@dataclass
class PetioleRecord:
    present: bool
    length_px: int
    width_px: float
    top_row: int
    col: int


@dataclass
class SyntheticLeaf:
    image: ImageRGB           # bottom scan
    top: ImageRGB             # top scan, same frame
    leaf_mask: np.ndarray
    vein_mask: np.ndarray     # veins inside the lamina plus the petiole
    petiole: PetioleRecord
    apex: Tuple[int, int]
    contour: Contour


def _draw(lo, hi, rng: np.random.Generator):
    """Inclusive draw; integer ranges give integers."""
    return rng.integers(lo, hi + 1) if isinstance(lo, int) else rng.uniform(lo, hi)


def _segment(canvas: np.ndarray, p0, p1, w0: float, w1: float) -> None:
    """Tapered quad from p0 (width w0) to p1 (width w1)."""
    d = np.asarray(p1, float) - np.asarray(p0, float)
    n = np.hypot(*d)
    if n == 0:
        return
    nr, nc = -d[1] / n, d[0] / n
    rows = [p0[0] + nr * w0 / 2, p1[0] + nr * w1 / 2, p1[0] - nr * w1 / 2, p0[0] - nr * w0 / 2]
    cols = [p0[1] + nc * w0 / 2, p1[1] + nc * w1 / 2, p1[1] - nc * w1 / 2, p0[1] - nc * w0 / 2]
    rr, cc = polygon(rows, cols, shape=canvas.shape)
    canvas[rr, cc] = True
    # keep thin links 8-connected
    steps = int(np.ceil(n)) + 1
    lr = np.round(np.linspace(p0[0], p1[0], steps)).astype(int)
    lc = np.round(np.linspace(p0[1], p1[1], steps)).astype(int)
    ok = (lr >= 0) & (lr < canvas.shape[0]) & (lc >= 0) & (lc < canvas.shape[1])
    canvas[lr[ok], lc[ok]] = True


def _branch(canvas, p0, angle, length, width, depth, rng) -> None:
    p1 = (p0[0] - length * np.cos(angle), p0[1] + length * np.sin(angle))
    _segment(canvas, p0, p1, width, max(1.0, width * 0.6))
    if depth <= 0 or length < 12:
        return
    for frac in (0.4, 0.7):
        q = (p0[0] + (p1[0] - p0[0]) * frac, p0[1] + (p1[1] - p0[1]) * frac)
        side = 1.0 if rng.random() < 0.5 else -1.0
        _branch(canvas, q, angle + side * rng.uniform(0.5, 0.9), length * rng.uniform(0.35, 0.5),
                max(1.0, width * 0.5), depth - 1, rng)


def _shade(mask_layers: List[Tuple[np.ndarray, Tuple[int, int, int]]], shape, rng) -> np.ndarray:
    img = np.full(shape + (3,), float(BACKGROUND))
    img += rng.normal(0.0, 1.0, size=img.shape)
    texture = ndimage.gaussian_filter(rng.normal(0.0, TEXTURE_SIGMA, size=shape), 1.5) * 2.5
    for mask, colour in mask_layers:
        for ch in range(3):
            img[..., ch][mask] = colour[ch] + texture[mask]
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def generate_synthetic_leaf(rng: np.random.Generator, params: SyntheticLeafParams = SyntheticLeafParams()
                            ) -> SyntheticLeaf:
    H, W = params.height, params.width
    L = float(_draw(*params.length_frac, rng)) * H
    half_w = 0.5 * L * float(_draw(*params.width_ratio, rng))
    apex_r = float(rng.uniform(0.05, 0.08)) * H
    col = W / 2.0 + float(rng.uniform(-0.03, 0.03)) * W
    if L < 16 or half_w < 8 or col - half_w < 2 or col + half_w > W - 3:
        raise SyntheticLeafError(f"degenerate lamina: length {L:.1f}, half width {half_w:.1f}")

    # lamina outline: widest below the middle, serrated margin
    s = np.linspace(0.0, 1.0, 400)
    teeth = int(_draw(*params.teeth, rng))
    depth = float(_draw(*params.tooth_depth, rng))
    profile = np.sin(np.pi * s ** 1.35) ** 0.7
    saw = 1.0 - depth * ((s * teeth) % 1.0) * ((s > 0.06) & (s < 0.94))
    w = half_w * profile * saw
    rows = apex_r + s * L
    outline_r = np.concatenate([rows, rows[::-1]])
    outline_c = np.concatenate([col - w, (col + w)[::-1]])
    leaf = np.zeros((H, W), dtype=bool)
    rr, cc = polygon(outline_r, outline_c, shape=(H, W))
    leaf[rr, cc] = True
    leaf = ndimage.binary_fill_holes(leaf)
    if leaf.sum() < 64:
        raise SyntheticLeafError("lamina rasterized to fewer than 64 pixels")
    base_row = int(np.nonzero(leaf.any(axis=1))[0].max())
    base_col = int(round(np.nonzero(leaf[base_row])[0].mean()))

    # vein tree
    tree = np.zeros_like(leaf)
    mid_w = float(_draw(*params.midrib_width, rng))
    apex_pt = (apex_r + 0.03 * L, col)
    base_pt = (float(base_row), float(base_col))
    _segment(tree, base_pt, apex_pt, mid_w, max(2.0, mid_w / 3.0))
    n_lat = int(_draw(*params.laterals, rng))
    for k, pos in enumerate(np.linspace(0.2, 0.85, n_lat)):
        pos = float(np.clip(pos + rng.uniform(-0.03, 0.03), 0.1, 0.9))
        r0 = apex_r + pos * L
        local_w = float(np.interp(pos, s, w))
        side = 1.0 if k % 2 == 0 else -1.0
        angle = side * float(rng.uniform(0.7, 1.0))              # radians off the midrib, toward the apex
        reach = 0.9 * local_w / max(np.sin(abs(angle)), 0.3)
        lat_w = max(2.0, 0.45 * mid_w * (1.0 - 0.6 * (1.0 - pos)))
        _branch(tree, (r0, col), angle, reach, lat_w, params.branch_depth, rng)
    veins = tree & leaf

    # petiole
    pet = np.zeros_like(leaf)
    p_len = int(_draw(*params.petiole_length, rng))
    p_len = min(p_len, H - base_row - 2)
    if params.petiole_taper is not None:
        w_base, w_tip = params.petiole_taper
        p_width = (w_base + w_tip) / 2.0
    else:
        w_base = w_tip = float(_draw(*params.petiole_width, rng))
        p_width = w_base
    present = p_len > 0
    if present:
        for i in range(p_len):
            wi = int(round(w_base + (w_tip - w_base) * (i / max(1, p_len - 1))))
            c0 = base_col - wi // 2
            pet[base_row + 1 + i, max(0, c0):c0 + wi] = True
    veins = veins | pet

    bottom = _shade([(leaf, BOTTOM_LAMINA), (pet, BOTTOM_VEIN), (veins & leaf, BOTTOM_VEIN)], (H, W), rng)
    top = _shade([(leaf, TOP_LAMINA), (pet, BOTTOM_VEIN), (veins & leaf, TOP_VEIN)], (H, W), rng)
    top_r = int(np.nonzero(leaf.any(axis=1))[0].min())
    apex = (top_r, int(np.nonzero(leaf[top_r])[0].min()))
    return SyntheticLeaf(
        image=ImageRGB(bottom, params.dpi), top=ImageRGB(top, params.dpi),
        leaf_mask=leaf, vein_mask=veins,
        petiole=PetioleRecord(present, p_len if present else 0, p_width if present else 0.0,
                              base_row + 1, base_col),
        apex=apex, contour=trace_outer_contour(leaf),
    )


def leaf_seeds(seed: int, n: int) -> List[int]:
    return [int(v) for v in np.random.default_rng(seed).integers(0, 2**31 - 1, size=n)]


def write_fixtures(out_dir: str | pathlib.Path, n: int, seed: int,
                   params: SyntheticLeafParams = SyntheticLeafParams()) -> pd.DataFrame:
    """Render `n` leaves as PNGs under `out_dir` and write manifest.csv next to them."""
    from leaf_pheno.io.persistence import write_mask_png, write_png

    out = pathlib.Path(out_dir); out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, s in enumerate(leaf_seeds(seed, n)):
        leaf = generate_synthetic_leaf(np.random.default_rng(s), params)
        stem = f"leaf_{i:03d}"
        paths = {
            "bottom": f"{stem}_bottom.png", "top": f"{stem}_top.png",
            "leaf_mask": f"{stem}_leaf.png", "vein_mask": f"{stem}_veins.png",
        }
        write_png(out / paths["bottom"], leaf.image)
        write_png(out / paths["top"], leaf.top)
        write_mask_png(out / paths["leaf_mask"], leaf.leaf_mask)
        write_mask_png(out / paths["vein_mask"], leaf.vein_mask)
        rows.append({"sample_id": stem, "seed": s, **paths, "dpi": params.dpi,
                     "apex_row": leaf.apex[0], "apex_col": leaf.apex[1],
                     "petiole_length_px": leaf.petiole.length_px, "petiole_width_px": leaf.petiole.width_px})
        log.info("[synth] %s seed=%d petiole=%dx%.1f", stem, s, leaf.petiole.length_px, leaf.petiole.width_px)
    manifest = pd.DataFrame(rows)
    manifest.to_csv(out / "manifest.csv", index=False)
    return manifest
