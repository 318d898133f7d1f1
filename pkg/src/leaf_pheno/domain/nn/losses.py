"""Loss functions and their gradients with respect to the prediction.

Each loss has a value function (what the unit tests pin) and a `*_grad`
companion used by backprop. Probabilities are clipped to [EPS, 1-EPS] before
any log; the gradient is zero where clipping was active.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from leaf_pheno.errors import ConfigError, ShapeError

EPS = 1e-7
DEFAULT_N = 128
FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0

LossKind = Literal["weighted_mse", "focal", "bce"]


@dataclass(frozen=True)
class WeightVector:
    """Per-point trace weights, two near the tile center easing to one at the edge."""
    n: int = DEFAULT_N
    beta: float = -4.0

    @property
    def alpha(self) -> float:
        return 8.0 / self.n

    @property
    def omega(self) -> np.ndarray:
        i = np.arange(1, self.n + 1, dtype=np.float64)
        return 1.0 + (1.0 - np.tanh(self.alpha * i + self.beta)) / 2.0


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: prediction {a.shape} vs target {b.shape}")


def weighted_mse(pred: np.ndarray, target: np.ndarray, w: Optional[WeightVector] = None) -> float:
    """(1/N) sum_i w_i |y_i - yhat_i|^2 for a 2xN set, averaged over a leading batch axis if present."""
    pred = np.asarray(pred, dtype=np.float64); target = np.asarray(target, dtype=np.float64)
    _same_shape(pred, target, "weighted_mse")
    n = pred.shape[-1]
    w = w or WeightVector(n)
    if w.n != n:
        raise ShapeError(f"weighted_mse: weight vector has N={w.n}, prediction has N={n}")
    sq = ((pred - target) ** 2).sum(axis=-2)           # (..., N)
    per_sample = (sq * w.omega).sum(axis=-1) / n
    return float(np.mean(per_sample))


def weighted_mse_grad(pred: np.ndarray, target: np.ndarray, w: Optional[WeightVector] = None) -> np.ndarray:
    n = pred.shape[-1]
    w = w or WeightVector(n)
    batch = pred.size // (2 * n)
    return 2.0 * (pred - target) * w.omega / (n * batch)


def _clip(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pc = np.clip(p, EPS, 1.0 - EPS)
    return pc, (p >= EPS) & (p <= 1.0 - EPS)


def focal_elementwise(p, y, alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64); y = np.asarray(y, dtype=np.float64)
    _same_shape(p, y, "focal_loss")
    pc, _ = _clip(p)
    pos = -alpha * (1.0 - pc) ** gamma * np.log(pc)
    neg = -(1.0 - alpha) * pc ** gamma * np.log(1.0 - pc)
    return y * pos + (1.0 - y) * neg


def focal_loss(p, y, alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA) -> float:
    return float(np.mean(focal_elementwise(p, y, alpha, gamma)))


def focal_grad(p, y, alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA) -> np.ndarray:
    pc, live = _clip(p)
    q = 1.0 - pc
    dpos = -alpha * (q ** gamma / pc - gamma * q ** (gamma - 1.0) * np.log(pc)) if gamma else -alpha / pc
    if gamma:
        dneg = (1.0 - alpha) * (pc ** gamma / q - gamma * pc ** (gamma - 1.0) * np.log(q))
    else:
        dneg = (1.0 - alpha) / q
    return np.where(live, y * dpos + (1.0 - y) * dneg, 0.0) / p.size


def bce_elementwise(p, y) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64); y = np.asarray(y, dtype=np.float64)
    _same_shape(p, y, "bce")
    pc, _ = _clip(p)
    return -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))


def bce(p, y) -> float:
    return float(np.mean(bce_elementwise(p, y)))


def bce_grad(p, y) -> np.ndarray:
    pc, live = _clip(p)
    return np.where(live, -y / pc + (1.0 - y) / (1.0 - pc), 0.0) / p.size


def loss_and_grad(kind: LossKind, out: np.ndarray, targets: np.ndarray,
                  alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA) -> Tuple[float, np.ndarray]:
    """Loss value and dL/dout for a model output batch.

    Two-class softmax outputs (B, 2, ...) are scored on the vein channel
    against targets shaped (B, ...); single-channel sigmoid outputs (B, 1, ...)
    accept targets with or without the channel axis.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if kind == "weighted_mse":
        _same_shape(out, targets, "weighted_mse")
        return weighted_mse(out, targets), weighted_mse_grad(out, targets)

    class_axis = out.ndim == targets.ndim + 1
    if class_axis and out.shape[1] == 2:
        p = out[:, 1]
    elif class_axis and out.shape[1] == 1:
        p = out[:, 0]
    else:
        p = out
    if kind == "focal":
        value, dp = focal_loss(p, targets, alpha, gamma), focal_grad(p, targets, alpha, gamma)
    elif kind == "bce":
        value, dp = bce(p, targets), bce_grad(p, targets)
    else:
        raise ConfigError(f"unknown loss kind {kind!r}")

    if not class_axis:
        return value, dp
    dout = np.zeros_like(out)
    dout[:, 1 if out.shape[1] == 2 else 0] = dp
    return value, dout
