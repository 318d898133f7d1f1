"""Encoder-decoder comparison path with overlapping-window averaging."""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np

from leaf_pheno.errors import DegenerateInputError, EmptyMaskError
from leaf_pheno.domain.growing.grower import GRID, ProbAccumulator, _pick, threshold_sweep
from leaf_pheno.domain.imaging.image import ImageRGB, Tile
from leaf_pheno.domain.nn.model import Network, forward

log = logging.getLogger(__name__)

LEAF_THRESHOLD = 0.5
MIN_FOREGROUND = 0.25
CHUNK = 16

Task = Literal["leaf", "vein"]


@dataclass
class DenseResult:
    prob: np.ndarray
    coverage: np.ndarray


@dataclass
class DenseSegmentation:
    mask: np.ndarray
    threshold: float
    prob: np.ndarray


class WindowModel(Protocol):
    def predict_windows(self, image: ImageRGB, origins: np.ndarray, window: int) -> np.ndarray:
        """(B, window, window) probabilities for windows with top-left corners `origins`."""
        ...


class CnnDense:
    def __init__(self, net: Network, chunk: int = CHUNK):
        self.net = net
        self.chunk = chunk

    def predict_windows(self, image: ImageRGB, origins: np.ndarray, window: int) -> np.ndarray:
        out = []
        for lo in range(0, len(origins), self.chunk):
            batch = np.stack([image.pixels[r:r + window, c:c + window].transpose(2, 0, 1) / 255.0
                              for r, c in origins[lo:lo + self.chunk]])
            out.append(forward(self.net.params, self.net.spec, batch)[:, 0])
        return np.concatenate(out)


class OracleDense:
    """Emits the ground-truth mask of each window."""
    def __init__(self, gt: np.ndarray):
        self.gt = np.asarray(gt, dtype=np.float64)

    def predict_windows(self, image: ImageRGB, origins: np.ndarray, window: int) -> np.ndarray:
        return np.stack([self.gt[r:r + window, c:c + window] for r, c in origins])


def tile_starts(n: int, window: int, stride: int) -> List[int]:
    """Window offsets along one axis; the last window is clamped to the border."""
    starts = list(range(0, n - window + 1, stride))
    if starts[-1] + window < n:
        starts.append(n - window)
    return starts


def predict_tiled(model: WindowModel, image: ImageRGB, window: int, stride: Optional[int] = None) -> DenseResult:
    stride = stride or max(1, window // 2)
    H, W = image.shape
    if window > H or window > W:
        raise DegenerateInputError(f"window {window} larger than image {image.shape}")
    origins = np.array([(r, c) for r in tile_starts(H, window, stride) for c in tile_starts(W, window, stride)],
                       dtype=np.int64)
    total = np.zeros((H, W))
    cover = np.zeros((H, W), dtype=np.int64)
    probs = model.predict_windows(image, origins, window)
    for (r, c), p in zip(origins, probs):
        total[r:r + window, c:c + window] += p
        cover[r:r + window, c:c + window] += 1
    return DenseResult(np.clip(total / cover, 0.0, 1.0), cover)


def segment_dense(model: WindowModel, image: ImageRGB, task: Task, window: int,
                  grid: Sequence[float] = GRID) -> DenseSegmentation:
    res = predict_tiled(model, image, window)
    if task == "leaf":
        t = LEAF_THRESHOLD
    else:
        acc = ProbAccumulator(res.prob.copy(), np.ones(res.prob.shape, dtype=np.uint32))
        t = _pick(threshold_sweep(acc, grid))
    log.info("[dense] %s task threshold %.2f", task, t)
    return DenseSegmentation(res.prob > t, t, res.prob)


def make_dense_training_set(image: ImageRGB, gt_mask: np.ndarray, window: int, n_samples: int,
                            rng: np.random.Generator, reject_mask: Optional[np.ndarray] = None,
                            min_foreground: float = MIN_FOREGROUND) -> List[Tuple[Tile, np.ndarray]]:
    """Uniform windows over the image, rejecting those with under `min_foreground` of `reject_mask`."""
    gt = np.asarray(gt_mask, dtype=bool)
    guide = gt if reject_mask is None else np.asarray(reject_mask, dtype=bool)
    if not guide.any():
        raise EmptyMaskError("no foreground to sample windows from")
    H, W = image.shape
    if window > H or window > W:
        raise DegenerateInputError(f"window {window} larger than image {image.shape}")
    out: List[Tuple[Tile, np.ndarray]] = []
    for _ in range(50 * n_samples):
        if len(out) == n_samples:
            break
        r = int(rng.integers(0, H - window + 1)); c = int(rng.integers(0, W - window + 1))
        if guide[r:r + window, c:c + window].mean() < min_foreground:
            continue
        data = image.pixels[r:r + window, c:c + window] / 255.0
        out.append((Tile(data, (r + window // 2, c + window // 2)), gt[r:r + window, c:c + window][None].astype(np.float64)))
    if len(out) < n_samples:
        log.warning("[dense] only %d of %d training windows reach %.2f foreground after %d draws",
                    len(out), n_samples, min_foreground, 50 * n_samples)
    return out
