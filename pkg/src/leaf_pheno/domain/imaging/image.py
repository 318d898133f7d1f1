from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from skimage.filters import threshold_otsu

from leaf_pheno.errors import ConfigError, DegenerateInputError, NoForegroundError
from leaf_pheno.domain.morphology.components import densify, largest_component

DEFAULT_DPI = 300.0
PAD_VALUE = 1.0          # scanner background is white

Point = Tuple[int, int]


@dataclass
class ImageRGB:
    pixels: np.ndarray               # (H, W, 3) uint8
    dpi: float = DEFAULT_DPI

    def __post_init__(self) -> None:
        if self.dpi <= 0:
            raise ConfigError(f"dpi must be positive, got {self.dpi}")
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ConfigError(f"expected an (H, W, 3) RGB array, got {px.shape}")
        self.pixels = px.astype(np.uint8, copy=False)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def luminance(self) -> np.ndarray:
        return self.pixels.astype(np.float64).mean(axis=2)


@dataclass
class Tile:
    data: np.ndarray                 # (S, S, C) floats in [0, 1]
    center: Point

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    def chw(self) -> np.ndarray:
        """Channel-first copy, the layout the network consumes."""
        return np.ascontiguousarray(self.data.transpose(2, 0, 1))


@dataclass
class DisplacementSet:
    """N (row, col) offsets from a tile centre, stored as a 2 x N array."""
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return int(self.offsets.shape[1])

    def points(self, center: Point) -> np.ndarray:
        return self.offsets.T + np.asarray(center, dtype=np.float64)


def extract_tile(image: ImageRGB, center: Point, size: int,
                 overlay: Optional[Sequence[Point]] = None, channels: Optional[int] = None) -> Tile:
    """S x S crop centred on `center` (centre pixel at index S//2), white outside the image.

    With four channels the last one is 1.0 on the rasterized overlay path.
    """
    r, c = int(center[0]), int(center[1])
    if not (0 <= r < image.height and 0 <= c < image.width):
        raise DegenerateInputError(f"tile centre {center} outside image {image.shape}")
    channels = channels or (4 if overlay is not None else 3)
    half = size // 2
    r0, c0 = r - half, c - half
    out = np.full((size, size, channels), PAD_VALUE)
    if channels == 4:
        out[..., 3] = 0.0
    sr0, sr1 = max(r0, 0), min(r0 + size, image.height)
    sc0, sc1 = max(c0, 0), min(c0 + size, image.width)
    out[sr0 - r0:sr1 - r0, sc0 - c0:sc1 - c0, :3] = image.pixels[sr0:sr1, sc0:sc1] / 255.0
    if channels == 4 and overlay is not None and len(overlay):
        pts = np.asarray(densify(overlay), dtype=np.int64) - (r0, c0)
        keep = (pts[:, 0] >= 0) & (pts[:, 0] < size) & (pts[:, 1] >= 0) & (pts[:, 1] < size)
        out[pts[keep, 0], pts[keep, 1], 3] = 1.0
    return Tile(out, (r, c))


def auto_threshold(image: ImageRGB) -> np.ndarray:
    """Rough leaf mask: Otsu on mean-channel luminance, dark side, largest 8-connected component."""
    lum = image.luminance()
    if lum.min() == lum.max():
        raise NoForegroundError("image has a single luminance level")
    fg = lum <= threshold_otsu(lum)
    if not fg.any():
        raise NoForegroundError("no pixels darker than the Otsu threshold")
    return largest_component(fg, 8)
