"""Leaf-boundary tracing by repeated short contour extensions.

Each iteration cuts a tile around the current point (with the trailing path
drawn into an overlay channel), asks a displacement model for the contour
ahead, appends the first `step` predicted points and recentres on the last
one. Burn-in iterations only position the trace; closure is detected against
stored points older than the most recent `exclude_recent`.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import ndimage
from scipy.spatial.distance import cdist

from leaf_pheno.errors import ContourError, NonConvergenceError
from leaf_pheno.domain.imaging.image import DisplacementSet, ImageRGB, Tile, auto_threshold, extract_tile
from leaf_pheno.domain.morphology.components import (Contour, densify, fill_interior, is_closed,
                                                     largest_component, trace_outer_contour)
from leaf_pheno.domain.nn.model import Network, forward

log = logging.getLogger(__name__)

TILE = 256
N_POINTS = 128
STEP = 32
BURN_IN = 10
CLOSURE_RADIUS = 10.0
EXCLUDE_RECENT = 64
CAP_FACTOR = 4
INIT_OVERLAY = 16        # rough-boundary points drawn behind the start


class TraceConfig(BaseModel):
    tile_size: int = Field(TILE, ge=8)
    n_points: int = Field(N_POINTS, ge=2)
    step: int = Field(STEP, ge=1)
    burn_in: int = Field(BURN_IN, ge=0)
    closure_radius: float = Field(CLOSURE_RADIUS, gt=0)
    exclude_recent: int = Field(EXCLUDE_RECENT, ge=1)
    cap_factor: float = Field(CAP_FACTOR, gt=0)

    @model_validator(mode="after")
    def _step_within_points(self) -> "TraceConfig":
        if self.step > self.n_points:
            raise ValueError(f"step {self.step} exceeds n_points {self.n_points}")
        return self

    def iteration_cap(self, shape: Tuple[int, int]) -> int:
        return int(math.ceil(self.cap_factor * 2 * (shape[0] + shape[1]) / self.step))


@dataclass
class TraceState:
    start: Tuple[int, int]
    path: List[Tuple[int, int]]                                   # every visited point, overlay source
    points: List[Tuple[int, int]] = field(default_factory=list)   # stored contour points
    iteration: int = 0
    closure_index: Optional[int] = None


@dataclass
class TraceResult:
    contour: Contour
    mask: np.ndarray
    log: Dict[str, object]


class DisplacementModel(Protocol):
    def predict(self, tile: Tile) -> DisplacementSet: ...


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

def forward_offsets(contour: Sequence[Tuple[int, int]], index: int, direction: int,
                    origin: Tuple[int, int], tile_size: int, n_points: int) -> np.ndarray:
    """N offsets from `origin`, evenly spaced by arc length along the contour ahead of `index`.

    The walk stops at the first point leaving the tile or after one lap.
    """
    pts = np.asarray(contour, dtype=np.float64)
    L = len(pts)
    half = tile_size // 2
    o = np.asarray(origin, dtype=np.float64)
    ahead = [pts[index % L]]
    for k in range(1, L):
        p = pts[(index + direction * k) % L]
        d = p - o
        if d[0] < -half or d[0] > half - 1 or d[1] < -half or d[1] > half - 1:
            break
        ahead.append(p)
    ahead = np.asarray(ahead)
    if len(ahead) == 1:
        return np.repeat((ahead[0] - o)[:, None], n_points, axis=1)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(ahead, axis=0).T))])
    pos = np.linspace(arc[1], arc[-1], n_points)
    rows = np.interp(pos, arc, ahead[:, 0]) - o[0]
    cols = np.interp(pos, arc, ahead[:, 1]) - o[1]
    return np.stack([rows, cols])


def make_tracer_training_set(image: ImageRGB, gt_contour: Sequence[Tuple[int, int]],
                             tile_size: int = TILE, n_points: int = N_POINTS,
                             rng: Optional[np.random.Generator] = None, stride: int = 1
                             ) -> List[Tuple[Tile, DisplacementSet]]:
    """One (tile, targets) pair per contour pixel (every `stride`-th with stride > 1).

    The direction of travel is drawn per sample; the overlay holds the
    trailing path behind the centre.
    """
    if len(gt_contour) < 2 or not is_closed(gt_contour):
        raise ContourError("training contour must be closed")
    rng = rng or np.random.default_rng(0)
    contour = [tuple(map(int, p)) for p in gt_contour]
    L = len(contour)
    trail = min(L - 1, tile_size)
    samples = []
    for i in range(0, L, stride):
        d = 1 if rng.random() < 0.5 else -1
        centre = contour[i]
        behind = [contour[(i - d * k) % L] for k in range(trail, -1, -1)]
        tile = extract_tile(image, centre, tile_size, overlay=behind, channels=4)
        samples.append((tile, DisplacementSet(forward_offsets(contour, i, d, centre, tile_size, n_points))))
    return samples


def stack_samples(samples: Sequence[Tuple[Tile, object]], dtype=np.float32) -> Tuple[np.ndarray, np.ndarray]:
    X = np.stack([t.chw() for t, _ in samples]).astype(dtype)
    Y = np.stack([y.offsets if isinstance(y, DisplacementSet) else np.asarray(y) for _, y in samples]).astype(dtype)
    return X, Y


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

class CnnTracer:
    def __init__(self, net: Network):
        self.net = net

    def predict(self, tile: Tile) -> DisplacementSet:
        out = forward(self.net.params, self.net.spec, tile.chw()[None])
        return DisplacementSet(out[0])


class OracleTracer:
    """Reads the true contour ahead of the nearest ground-truth point, clockwise."""
    def __init__(self, gt_contour: Sequence[Tuple[int, int]], tile_size: int = TILE, n_points: int = N_POINTS):
        self.contour = [tuple(map(int, p)) for p in gt_contour]
        self._pts = np.asarray(self.contour, dtype=np.float64)
        self.tile_size = tile_size
        self.n_points = n_points

    def predict(self, tile: Tile) -> DisplacementSet:
        d = cdist(np.asarray([tile.center], dtype=np.float64), self._pts)[0]
        i = int(np.argmin(d))
        return DisplacementSet(forward_offsets(self.contour, i, 1, tile.center, self.tile_size, self.n_points))


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def init_trace(image: ImageRGB, overlay_len: int = INIT_OVERLAY) -> Tuple[Tuple[int, int], List[Tuple[int, int]]]:
    """Start at the top of the rough mask; overlay is the rough boundary just behind it."""
    rough = auto_threshold(image)
    contour = trace_outer_contour(rough)
    start = contour[0]
    behind = contour[-overlay_len:] if len(contour) > 1 else []
    return start, list(behind) + [start]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def trace_leaf(model: DisplacementModel, image: ImageRGB, config: TraceConfig = TraceConfig()) -> TraceResult:
    start, overlay = init_trace(image)
    state = TraceState(start=start, path=list(overlay))
    cap = config.iteration_cap(image.shape)
    cur = start
    closed: Optional[Contour] = None
    overlay_len = config.tile_size

    for it in range(cap):
        state.iteration = it + 1
        tile = extract_tile(image, cur, config.tile_size, overlay=state.path[-overlay_len:], channels=4)
        disp = model.predict(tile)
        pts = _round_half_away(disp.points(cur)[:config.step])
        pts[:, 0] = np.clip(pts[:, 0], 0, image.height - 1)
        pts[:, 1] = np.clip(pts[:, 1], 0, image.width - 1)
        new: List[Tuple[int, int]] = []
        last = state.path[-1]
        for r, c in pts.tolist():
            if (r, c) != last:
                new.append((r, c)); last = (r, c)
        if not new:
            continue

        if it >= config.burn_in:
            if len(state.points) > config.exclude_recent:
                older = np.asarray(state.points[:-config.exclude_recent], dtype=np.float64)
                d = cdist(np.asarray(new, dtype=np.float64), older)
                hits = np.nonzero((d <= config.closure_radius).any(axis=1))[0]
                if len(hits):
                    k = int(hits[0])
                    j = int(np.argmin(d[k]))
                    closed = densify(state.points[j:] + new[:k + 1], closed=True)
                    state.closure_index = it
                    break
            state.points.extend(new)
        state.path.extend(new)
        cur = new[-1]

    if closed is None:
        raise NonConvergenceError(f"trace did not close within {cap} iterations", cap=cap)

    mask = fill_interior(closed, image.shape)
    mask = ndimage.binary_fill_holes(largest_component(mask, 8))
    trace_log = {"iterations": state.iteration, "burn_in": config.burn_in, "closure_index": state.closure_index,
                 "cap": cap, "stored_points": len(state.points), "contour_points": len(closed),
                 "start_row": start[0], "start_col": start[1]}
    log.info("[tracer] closed after %d iterations (%d contour points)", state.iteration, len(closed))
    return TraceResult(closed, mask, trace_log)
