"""Training-time tile augmentation: geometry, then colour, then blur.

Displacement targets follow continuous rotations, flips and jitter. Grid
targets (3x3 neighbour labels, dense masks) only follow right-angle rotations
and flips, which permute cells exactly.
"""
from __future__ import annotations
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import ndimage
from skimage.color import hsv2rgb, rgb2hsv
from skimage.transform import rotate

from .image import PAD_VALUE, DisplacementSet, Tile

Targets = Union[DisplacementSet, np.ndarray, None]


class AugmentConfig(BaseModel):
    rotate: bool = True
    rotation_deg: float = Field(360.0, ge=0)
    flip_h: bool = True
    flip_v: bool = True
    jitter_px: int = Field(2, ge=0)
    hue: float = Field(0.03, ge=0, le=0.5)
    saturation: float = Field(0.15, ge=0, le=1)
    brightness: float = Field(0.1, ge=0, le=1)
    contrast: float = Field(0.15, ge=0, le=1)
    blur_sigma: Tuple[float, float] = (0.0, 1.0)

    @model_validator(mode="after")
    def _blur_range(self) -> "AugmentConfig":
        lo, hi = self.blur_sigma
        if lo < 0 or hi < lo:
            raise ValueError(f"blur_sigma must be an ascending nonnegative range, got {self.blur_sigma}")
        return self

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(rotate=False, flip_h=False, flip_v=False, jitter_px=0, hue=0.0, saturation=0.0,
                   brightness=0.0, contrast=0.0, blur_sigma=(0.0, 0.0))

    @property
    def geometric(self) -> bool:
        return self.rotate or self.flip_h or self.flip_v or self.jitter_px > 0

    @property
    def colour(self) -> bool:
        return any((self.hue, self.saturation, self.brightness, self.contrast))


# ---- centred grid ops ----------------------------------------------------------
# For even sizes the centre pixel sits at S//2, so a plain flip moves it by one;
# the roll puts it back.

def _flip(a: np.ndarray, axis: int) -> np.ndarray:
    out = np.flip(a, axis)
    return np.roll(out, 1, axis) if a.shape[axis] % 2 == 0 else out


def _rot90(a: np.ndarray) -> np.ndarray:
    """Quarter turn counter-clockwise about the centre pixel."""
    out = np.rot90(a, 1, axes=(0, 1))
    return np.roll(out, 1, 0) if a.shape[0] % 2 == 0 else out


def _shift(a: np.ndarray, dr: int, dc: int, fill: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[...] = fill
    S0, S1 = a.shape[:2]
    src = a[max(0, -dr):S0 - max(0, dr), max(0, -dc):S1 - max(0, dc)]
    out[max(0, dr):max(0, dr) + src.shape[0], max(0, dc):max(0, dc) + src.shape[1]] = src
    return out


def rotate_offsets(offsets: np.ndarray, theta_deg: float) -> np.ndarray:
    """Rotate (dr, dc) vectors the way a counter-clockwise image rotation moves pixels."""
    t = np.deg2rad(theta_deg)
    dr, dc = offsets
    return np.stack([dr * np.cos(t) - dc * np.sin(t), dc * np.cos(t) + dr * np.sin(t)])


def _rotate_tile(data: np.ndarray, theta_deg: float) -> np.ndarray:
    S = data.shape[0]
    centre = (S // 2, S // 2)
    out = np.empty_like(data)
    out[..., :3] = rotate(data[..., :3], theta_deg, center=centre, order=1, mode="constant",
                          cval=PAD_VALUE, preserve_range=True)
    if data.shape[2] == 4:
        out[..., 3] = rotate(data[..., 3], theta_deg, center=centre, order=0, mode="constant",
                             cval=0.0, preserve_range=True)
    return np.clip(out, 0.0, 1.0)


def _colour(rgb: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    dh, ds, dv, dc = (rng.uniform(-x, x) for x in (cfg.hue, cfg.saturation, cfg.brightness, cfg.contrast))
    hsv = rgb2hsv(rgb)
    hsv[..., 0] = (hsv[..., 0] + dh) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] * (1.0 + ds), 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * (1.0 + dv), 0.0, 1.0)
    out = hsv2rgb(hsv)
    mean = out.mean()
    return np.clip((out - mean) * (1.0 + dc) + mean, 0.0, 1.0)


def augment_tile(tile: Tile, targets: Targets, rng: np.random.Generator,
                 config: AugmentConfig) -> Tuple[Tile, Targets]:
    data = tile.data.copy()
    fill = np.array([PAD_VALUE] * 3 + [0.0] * (data.shape[2] - 3))

    if isinstance(targets, DisplacementSet):
        offsets = targets.offsets.astype(np.float64).copy()
        if config.rotate:
            theta = float(rng.uniform(0.0, config.rotation_deg))
            data = _rotate_tile(data, theta)
            offsets = rotate_offsets(offsets, theta)
        if config.flip_h and rng.random() < 0.5:
            data = _flip(data, 1); offsets[1] = -offsets[1]
        if config.flip_v and rng.random() < 0.5:
            data = _flip(data, 0); offsets[0] = -offsets[0]
        if config.jitter_px:
            jr, jc = (int(v) for v in rng.integers(-config.jitter_px, config.jitter_px + 1, size=2))
            data = _shift(data, jr, jc, fill)
            offsets = offsets + np.array([[jr], [jc]], dtype=np.float64)
        targets = DisplacementSet(offsets)
    else:
        grid = None if targets is None else np.asarray(targets).copy()
        if config.rotate:
            for _ in range(int(rng.integers(4))):
                data = _rot90(data)
                grid = None if grid is None else _rot90(grid)
        if config.flip_h and rng.random() < 0.5:
            data = _flip(data, 1); grid = None if grid is None else _flip(grid, 1)
        if config.flip_v and rng.random() < 0.5:
            data = _flip(data, 0); grid = None if grid is None else _flip(grid, 0)
        targets = grid

    if config.colour:
        data[..., :3] = _colour(data[..., :3], rng, config)
    lo, hi = config.blur_sigma
    if hi > 0:
        sigma = float(rng.uniform(lo, hi))
        if sigma > 0:
            data[..., :3] = np.clip(ndimage.gaussian_filter(data[..., :3], sigma=(sigma, sigma, 0)), 0.0, 1.0)
    return Tile(data, tile.center), targets


def batch_augmenter(config: AugmentConfig, displacements: bool
                    ) -> Callable[[np.ndarray, np.ndarray, np.random.Generator], Tuple[np.ndarray, np.ndarray]]:
    """Wrap augment_tile for channel-first training batches."""
    def apply(X: np.ndarray, Y: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        xs, ys = [], []
        for x, y in zip(X, Y):
            tile = Tile(x.transpose(1, 2, 0), (0, 0))
            grid = y[0] if (not displacements and y.ndim == 3 and y.shape[0] == 1) else y
            t, tgt = augment_tile(tile, DisplacementSet(y) if displacements else grid, rng, config)
            xs.append(t.chw())
            if displacements:
                ys.append(tgt.offsets)
            else:
                ys.append(tgt[None] if grid is not y else tgt)
        return np.stack(xs), np.stack(ys)
    return apply
