"""Mini-batch training loop with early stopping on validation loss."""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from leaf_pheno.errors import EmptyDatasetError
from .losses import FOCAL_ALPHA, FOCAL_GAMMA, LossKind, loss_and_grad
from .model import ModelParams, Spec, _run, backward, init_params
from .optim import AdamConfig, AdamState, adam_step

log = logging.getLogger(__name__)

EPOCHS = 1000
PATIENCE = 20

Dataset = Tuple[np.ndarray, np.ndarray]
# (inputs, targets, rng) -> (inputs, targets); applied per training batch
BatchAugment = Callable[[np.ndarray, np.ndarray, np.random.Generator], Tuple[np.ndarray, np.ndarray]]


class TrainConfig(BaseModel):
    epochs: int = Field(EPOCHS, ge=1)
    batch_size: int = Field(256, ge=1)
    early_stop_patience: int = Field(PATIENCE, ge=1)
    seed: int = 0
    loss_kind: LossKind = "weighted_mse"
    lr: float = Field(1e-3, gt=0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    focal_alpha: float = FOCAL_ALPHA
    focal_gamma: float = FOCAL_GAMMA

    @field_validator("beta1", "beta2")
    @classmethod
    def _beta_range(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("Adam betas must lie in [0, 1)")
        return v

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.beta1, self.beta2, self.eps)


@dataclass
class TrainResult:
    params: ModelParams
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0


def evaluate_loss(params: ModelParams, spec: Spec, data: Dataset, config: TrainConfig) -> float:
    """Inference-mode loss over a dataset, accumulated batch by batch."""
    X, Y = data
    total, n = 0.0, 0
    for lo in range(0, len(X), config.batch_size):
        xb, yb = X[lo:lo + config.batch_size], Y[lo:lo + config.batch_size]
        out, _, _ = _run(params, spec, np.asarray(xb, dtype=np.float64), training=False)
        value, _ = loss_and_grad(config.loss_kind, out, yb, config.focal_alpha, config.focal_gamma)
        total += value * len(xb); n += len(xb)
    return total / n


def train_model(spec: Spec, train_set: Dataset, val_set: Dataset, config: TrainConfig,
                augment: Optional[BatchAugment] = None, params: Optional[ModelParams] = None,
                on_epoch: Optional[Callable[[Dict[str, float]], None]] = None) -> TrainResult:
    """Fit `spec` on `train_set`; return the params with the lowest validation loss.

    Stops once `early_stop_patience` epochs pass without a strict improvement,
    or after `config.epochs`.
    """
    if len(train_set[0]) == 0 or len(val_set[0]) == 0:
        raise EmptyDatasetError("training and validation sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    params = params.copy() if params is not None else init_params(spec, int(rng.integers(2**32)))
    state = AdamState()
    X, Y = train_set
    best = TrainResult(params.copy())
    best_val = np.inf
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        total, seen = 0.0, 0
        for lo in range(0, len(X), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb, yb = X[idx], Y[idx]
            if augment is not None:
                xb, yb = augment(xb, yb, rng)
            res = backward(params, spec, xb, yb, config.loss_kind,
                           focal_alpha=config.focal_alpha, focal_gamma=config.focal_gamma)
            params, state = adam_step(params, res.grads, state, config.adam)
            params = params.replace(res.running)
            total += res.loss * len(idx); seen += len(idx)
        train_loss = total / seen
        val_loss = evaluate_loss(params, spec, val_set, config)
        row = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        best.history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if val_loss < best_val:
            best_val = val_loss; best.params = params.copy(); best.best_epoch = epoch; stale = 0
        else:
            stale += 1
        if epoch % 10 == 0:
            log.info("[train] epoch=%d train=%.6f val=%.6f best=%d", epoch, train_loss, val_loss, best.best_epoch)
        if stale >= config.early_stop_patience:
            log.info("[train] early stop at epoch %d (best %d)", epoch, best.best_epoch)
            break
    return best
