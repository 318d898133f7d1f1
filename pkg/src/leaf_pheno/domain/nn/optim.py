from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .model import ModelParams


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ModelParams, grads: Dict[str, np.ndarray], state: AdamState,
              config: AdamConfig = AdamConfig()) -> Tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    updated: Dict[str, np.ndarray] = {}
    for name, g in grads.items():
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g * g
        new_m[name] = m; new_v[name] = v
        updated[name] = params[name] - config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return params.replace(updated), AdamState(t, new_m, new_v)
