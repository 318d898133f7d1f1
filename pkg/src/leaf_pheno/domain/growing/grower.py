"""Vein region growing from random seeds inside the leaf body.

Every frontier pixel has its 3x3 neighbourhood classified once. The vein
probabilities are summed into an accumulator for all nine pixels, and
neighbours scored above the admission cutoff join the next frontier. The
final mask thresholds the per-pixel average at the grid value with the
fewest connected components.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.imaging.image import ImageRGB, Tile, extract_tile
from leaf_pheno.domain.morphology.components import connected_components
from leaf_pheno.domain.nn.model import Network, forward

log = logging.getLogger(__name__)

N_SEEDS = 10_000
CUTOFF = 0.5
GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))     # 0.05 .. 0.95
NEG_RATIO = 10
TILE = 128
CHUNK = 512

# 3x3 neighbourhood offsets in row-major order, matching label grids
NEIGHBOURS = np.array([(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)], dtype=np.int64)


class GrowConfig(BaseModel):
    n_seeds: int = Field(N_SEEDS, ge=1)
    seed: int = 0
    grid: Tuple[float, ...] = GRID
    cutoff: float = Field(CUTOFF, gt=0, lt=1)

    @field_validator("grid")
    @classmethod
    def _grid(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v or any(not 0.0 < t < 1.0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("threshold grid must be ascending inside (0, 1)")
        return v


@dataclass
class ProbAccumulator:
    sum: np.ndarray
    count: np.ndarray

    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> "ProbAccumulator":
        return cls(np.zeros(shape, dtype=np.float64), np.zeros(shape, dtype=np.uint32))

    def add(self, centres: np.ndarray, probs: np.ndarray) -> None:
        """Add (F, 3, 3) vein probabilities around (F, 2) centres; off-image cells are dropped."""
        H, W = self.sum.shape
        rr = centres[:, 0, None] + NEIGHBOURS[None, :, 0]
        cc = centres[:, 1, None] + NEIGHBOURS[None, :, 1]
        ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
        p = probs.reshape(len(centres), 9)
        np.add.at(self.sum, (rr[ok], cc[ok]), p[ok])
        np.add.at(self.count, (rr[ok], cc[ok]), 1)

    def average(self) -> np.ndarray:
        out = np.zeros_like(self.sum)
        seen = self.count > 0
        out[seen] = self.sum[seen] / self.count[seen]
        return out


@dataclass
class VeinSegmentation:
    mask: np.ndarray
    threshold: float
    acc: ProbAccumulator
    sweep: pd.DataFrame
    seeds: int


class NeighbourhoodModel(Protocol):
    def classify(self, image: ImageRGB, centres: np.ndarray) -> np.ndarray:
        """(F, 3, 3) vein-class probabilities for the neighbourhoods of (F, 2) centres."""
        ...


class CnnGrower:
    def __init__(self, net: Network, chunk: int = CHUNK):
        self.net = net
        self.chunk = chunk

    def classify(self, image: ImageRGB, centres: np.ndarray) -> np.ndarray:
        S = self.net.tile
        out = []
        for lo in range(0, len(centres), self.chunk):
            batch = np.stack([extract_tile(image, (int(r), int(c)), S).chw() for r, c in centres[lo:lo + self.chunk]])
            out.append(forward(self.net.params, self.net.spec, batch)[:, 1])
        return np.concatenate(out) if out else np.zeros((0, 3, 3))


class OracleGrower:
    """Returns the ground-truth labels of each neighbourhood."""
    def __init__(self, gt_vein: np.ndarray):
        self._pad = np.pad(np.asarray(gt_vein, dtype=np.float64), 1)

    def classify(self, image: ImageRGB, centres: np.ndarray) -> np.ndarray:
        rr = centres[:, 0, None] + 1 + NEIGHBOURS[None, :, 0]
        cc = centres[:, 1, None] + 1 + NEIGHBOURS[None, :, 1]
        return self._pad[rr, cc].reshape(-1, 3, 3)


def neighbourhood_labels(mask: np.ndarray, centre: Tuple[int, int]) -> np.ndarray:
    pad = np.pad(np.asarray(mask, dtype=np.float64), 1)
    r, c = centre
    return pad[r:r + 3, c:c + 3].copy()


def make_grower_training_set(image: ImageRGB, gt_vein: np.ndarray, body_mask: np.ndarray,
                             neg_ratio: float = NEG_RATIO, tile_size: int = TILE,
                             rng: Optional[np.random.Generator] = None,
                             max_positives: Optional[int] = None) -> List[Tuple[Tile, np.ndarray]]:
    """Tiles centred on every vein pixel plus up to `neg_ratio` times as many body background pixels."""
    gt_vein = np.asarray(gt_vein, dtype=bool)
    body_mask = np.asarray(body_mask, dtype=bool)
    if gt_vein.shape != image.shape or body_mask.shape != image.shape:
        raise DegenerateInputError("masks must match the image dimensions")
    if not gt_vein.any():
        raise EmptyMaskError("vein mask is empty")
    if not 0 <= neg_ratio <= NEG_RATIO:
        raise DegenerateInputError(f"neg_ratio must lie in [0, {NEG_RATIO}]")
    rng = rng or np.random.default_rng(0)
    pos = np.argwhere(gt_vein)
    if max_positives is not None and len(pos) > max_positives:
        pos = pos[np.sort(rng.choice(len(pos), max_positives, replace=False))]
    background = np.argwhere(body_mask & ~gt_vein)
    n_neg = min(len(background), int(neg_ratio * len(pos)))
    neg = background[np.sort(rng.choice(len(background), n_neg, replace=False))] if n_neg else background[:0]
    samples = []
    for r, c in np.concatenate([pos, neg]).tolist():
        samples.append((extract_tile(image, (r, c), tile_size), neighbourhood_labels(gt_vein, (r, c))))
    return samples


def grow(model: NeighbourhoodModel, image: ImageRGB, seeds: Sequence[Tuple[int, int]],
         cutoff: float = CUTOFF) -> ProbAccumulator:
    seeds = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    if len(seeds) == 0:
        raise DegenerateInputError("grow needs at least one seed")
    H, W = image.shape
    if (seeds < 0).any() or (seeds[:, 0] >= H).any() or (seeds[:, 1] >= W).any():
        raise DegenerateInputError("seed outside image")
    acc = ProbAccumulator.zeros((H, W))
    visited = np.zeros((H, W), dtype=bool)
    _, first = np.unique(seeds[:, 0] * W + seeds[:, 1], return_index=True)
    frontier = seeds[np.sort(first)]
    rounds = 0
    while len(frontier):
        rounds += 1
        visited[frontier[:, 0], frontier[:, 1]] = True
        probs = model.classify(image, frontier)
        acc.add(frontier, probs)
        rr = frontier[:, 0, None] + NEIGHBOURS[None, :, 0]
        cc = frontier[:, 1, None] + NEIGHBOURS[None, :, 1]
        admit = (probs.reshape(len(frontier), 9) > cutoff) & (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
        nr, nc = rr[admit], cc[admit]
        fresh = ~visited[nr, nc]
        flat = nr[fresh] * W + nc[fresh]
        _, first = np.unique(flat, return_index=True)
        keep = np.sort(first)
        frontier = np.stack([nr[fresh][keep], nc[fresh][keep]], axis=1)
    log.debug("[grower] %d frontier rounds, %d pixels classified", rounds, int(visited.sum()))
    return acc


def threshold_sweep(acc: ProbAccumulator, grid: Sequence[float] = GRID) -> pd.DataFrame:
    if not (acc.count > 0).any():
        raise DegenerateInputError("accumulator has no counted pixels")
    avg = acc.average()
    rows = []
    for t in grid:
        m = avg > t
        _, n = connected_components(m, 8)
        rows.append({"threshold": float(t), "components": n, "pixels": int(m.sum())})
    return pd.DataFrame(rows)


def select_threshold(acc: ProbAccumulator, grid: Sequence[float] = GRID) -> float:
    """Grid value with the fewest components among nonempty masks; ties go to the smallest."""
    return _pick(threshold_sweep(acc, grid))


def _pick(sweep: pd.DataFrame) -> float:
    live = sweep[sweep["pixels"] > 0]
    if live.empty:
        raise DegenerateInputError("every grid threshold gives an empty mask")
    best = live.sort_values(["components", "threshold"], kind="mergesort").iloc[0]
    return float(best["threshold"])


def sample_seeds(body_mask: np.ndarray, n_seeds: int, rng: np.random.Generator) -> np.ndarray:
    pix = np.argwhere(np.asarray(body_mask, dtype=bool))
    if len(pix) == 0:
        raise EmptyMaskError("body mask is empty")
    if n_seeds >= len(pix):
        return pix
    return pix[rng.choice(len(pix), n_seeds, replace=False)]


def segment_veins(model: NeighbourhoodModel, image: ImageRGB, body_mask: np.ndarray,
                  config: GrowConfig = GrowConfig()) -> VeinSegmentation:
    rng = np.random.default_rng(config.seed)
    seeds = sample_seeds(body_mask, config.n_seeds, rng)
    acc = grow(model, image, seeds, config.cutoff)
    sweep = threshold_sweep(acc, config.grid)
    t = _pick(sweep)
    mask = acc.average() > t
    log.info("[grower] %d seeds, threshold %.2f, %d components", len(seeds), t,
             int(sweep.loc[sweep["threshold"] == t, "components"].iloc[0]))
    return VeinSegmentation(mask, t, acc, sweep, len(seeds))
