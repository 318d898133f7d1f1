from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from leaf_pheno.errors import NumericalError, ShapeError
from .layers import KERNELS, LayerSpec, PARAM_NAMES, STATE_NAMES, fan_in, output_shape, param_shapes
from .losses import FOCAL_ALPHA, FOCAL_GAMMA, LossKind, loss_and_grad

# ---- desk-scale architecture defaults ----------------------------------------
# The full-size tracer is seven blocks on 256 px tiles (six pooled), the grower
# six blocks on 128 px tiles. These defaults are small enough for a CPU.
TRACER_TILE = 64
TRACER_WIDTHS = (8, 16, 32)
GROWER_TILE = 32
GROWER_WIDTHS = (8, 16, 32)
DENSE_TILE = 64
N_POINTS = 128

Spec = List[LayerSpec]


@dataclass
class ModelParams:
    """Named parameter tensors, insertion-ordered by layer index."""
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> List[str]:
        return list(self.tensors)

    def trainable(self) -> List[str]:
        return [n for n in self.tensors if n.split(".", 1)[1] not in ("running_mean", "running_var")]

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})

    def replace(self, updates: Dict[str, np.ndarray]) -> "ModelParams":
        merged = dict(self.tensors); merged.update(updates)
        return ModelParams(merged)


@dataclass
class BackwardResult:
    loss: float
    grads: Dict[str, np.ndarray]
    running: Dict[str, np.ndarray]   # batch-norm statistics observed on this batch


# ---------------------------------------------------------------------------
# Spec builders
# ---------------------------------------------------------------------------

def _block(spec: Spec, cin: int, cout: int, pooled: bool) -> int:
    """Append three conv/bn/leaky units with residual joins; returns the pre-pool index."""
    spec += [LayerSpec("conv3x3", cin, cout), LayerSpec("batchnorm", cout, cout), LayerSpec("leaky_relu")]
    first = len(spec) - 1
    spec += [LayerSpec("conv3x3", cout, cout), LayerSpec("batchnorm", cout, cout), LayerSpec("leaky_relu"),
             LayerSpec("residual_add", source=first)]
    second = len(spec) - 1
    spec += [LayerSpec("conv3x3", cout, cout), LayerSpec("batchnorm", cout, cout), LayerSpec("leaky_relu"),
             LayerSpec("residual_add", source=second)]
    pre_pool = len(spec) - 1
    if pooled:
        spec.append(LayerSpec("maxpool2"))
    return pre_pool


def encoder(in_channels: int, widths: Sequence[int]) -> Tuple[Spec, List[int]]:
    """All blocks but the last pool. Returns the chain and the pre-pool skip indices."""
    spec: Spec = []
    skips: List[int] = []
    cin = in_channels
    for k, w in enumerate(widths):
        pooled = k < len(widths) - 1
        idx = _block(spec, cin, w, pooled)
        if pooled:
            skips.append(idx)
        cin = w
    return spec, skips


def _reduced(tile: int, widths: Sequence[int]) -> int:
    pools = len(widths) - 1
    if tile % (1 << pools):
        raise ShapeError(f"tile {tile} is not divisible by 2^{pools}")
    return tile >> pools


def tracer_spec(tile: int = TRACER_TILE, widths: Sequence[int] = TRACER_WIDTHS,
                in_channels: int = 4, n_points: int = N_POINTS, zero_head: bool = False) -> Spec:
    spec, _ = encoder(in_channels, widths)
    s = _reduced(tile, widths)
    spec.append(LayerSpec("conv_head", widths[-1], 2 * n_points, kernel=(s, s),
                          out_shape=(2, n_points), zero_init=zero_head))
    return spec


def grower_spec(tile: int = GROWER_TILE, widths: Sequence[int] = GROWER_WIDTHS,
                in_channels: int = 3) -> Spec:
    spec, _ = encoder(in_channels, widths)
    s = _reduced(tile, widths)
    spec.append(LayerSpec("conv_head", widths[-1], 18, kernel=(s, s), out_shape=(2, 3, 3)))
    spec.append(LayerSpec("softmax_channel"))
    return spec


def dense_spec(tile: int = DENSE_TILE, widths: Sequence[int] = GROWER_WIDTHS,
               in_channels: int = 3) -> Spec:
    """Encoder-decoder with skips drawn from the activations preceding each pool."""
    _reduced(tile, widths)
    spec, skips = encoder(in_channels, widths)
    cin = widths[-1]
    for level in reversed(range(len(skips))):
        w = widths[level]
        spec += [LayerSpec("transpose_conv2", cin, w), LayerSpec("concat_skip", source=skips[level]),
                 LayerSpec("conv3x3", 2 * w, w), LayerSpec("batchnorm", w, w), LayerSpec("leaky_relu"),
                 LayerSpec("conv3x3", w, w), LayerSpec("batchnorm", w, w), LayerSpec("leaky_relu")]
        cin = w
    spec += [LayerSpec("conv3x3", cin, 1), LayerSpec("sigmoid")]
    return spec


def encoder_length(spec: Spec) -> int:
    for i, layer in enumerate(spec):
        if layer.kind in ("conv_head", "transpose_conv2"):
            return i
    return len(spec)


# ---------------------------------------------------------------------------
# Shapes, params, accounting
# ---------------------------------------------------------------------------

def infer_shapes(spec: Spec, input_shape: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    shapes: List[Tuple[int, ...]] = []
    cur = tuple(input_shape)
    for i, layer in enumerate(spec):
        if layer.source is not None and not (0 <= layer.source < i):
            raise ShapeError(f"layer {i} joins from invalid source {layer.source}", i)
        skip = shapes[layer.source] if layer.source is not None else None
        cur = output_shape(i, layer, cur, skip)
        shapes.append(cur)
    return shapes


def init_params(spec: Spec, seed: int = 0) -> ModelParams:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases, unit batch-norm scale."""
    rng = np.random.default_rng(seed)
    tensors: Dict[str, np.ndarray] = {}
    for i, layer in enumerate(spec):
        for name, shape in param_shapes(i, layer).items():
            leaf = name.split(".", 1)[1]
            if leaf == "weight":
                if layer.zero_init:
                    t = np.zeros(shape)
                else:
                    bound = np.sqrt(6.0 / fan_in(layer))
                    t = rng.uniform(-bound, bound, size=shape)
            elif leaf in ("gamma", "running_var"):
                t = np.ones(shape)
            else:
                t = np.zeros(shape)
            tensors[name] = t
    return ModelParams(tensors)


def count_params(spec: Spec, prefix: Optional[int] = None) -> int:
    """Trainable scalar count of the first `prefix` layers (all layers by default)."""
    n = 0
    for i, layer in enumerate(spec[:prefix]):
        for name, shape in param_shapes(i, layer).items():
            if name.split(".", 1)[1] in PARAM_NAMES.get(layer.kind, ()):
                n += int(np.prod(shape))
    return n


def activation_bytes(spec: Spec, input_shape: Tuple[int, ...]) -> int:
    """Per-sample float64 bytes held by the input and every layer output."""
    total = int(np.prod(input_shape))
    for s in infer_shapes(spec, input_shape):
        total += int(np.prod(s))
    return total * 8


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _check_batch(spec: Spec, batch: np.ndarray) -> None:
    if batch.ndim < 2:
        raise ShapeError(f"batch must carry a leading sample axis, got {batch.shape}", 0)
    infer_shapes(spec, batch.shape[1:])


def _run(params: ModelParams, spec: Spec, batch: np.ndarray, training: bool):
    outs: List[np.ndarray] = []
    caches = []
    running: Dict[str, np.ndarray] = {}
    x = batch
    for i, layer in enumerate(spec):
        fwd, _ = KERNELS[layer.kind]
        skip = outs[layer.source] if layer.source is not None else None
        x, cache, upd = fwd(i, layer, params.tensors, x, skip, training)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite activation after layer {i} ({layer.kind})", i)
        outs.append(x); caches.append(cache); running.update(upd)
    return x, caches, running


def forward(params: ModelParams, spec: Spec, batch: np.ndarray, training: bool = False) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    _check_batch(spec, batch)
    out, _, _ = _run(params, spec, batch, training)
    return out


def backward(params: ModelParams, spec: Spec, batch: np.ndarray, targets: np.ndarray,
             loss_kind: LossKind, loss_scale: float = 1.0,
             focal_alpha: float = FOCAL_ALPHA, focal_gamma: float = FOCAL_GAMMA) -> BackwardResult:
    """Training-mode forward pass, loss, and reverse sweep over the chain."""
    batch = np.asarray(batch, dtype=np.float64)
    _check_batch(spec, batch)
    out, caches, running = _run(params, spec, batch, training=True)
    loss, dy = loss_and_grad(loss_kind, out, targets, focal_alpha, focal_gamma)
    dy = dy * loss_scale

    grads: Dict[str, np.ndarray] = {}
    pending: List[Optional[np.ndarray]] = [None] * len(spec)
    for i in reversed(range(len(spec))):
        layer = spec[i]
        if pending[i] is not None:
            dy = dy + pending[i]
        _, bwd = KERNELS[layer.kind]
        dx, dparams, dskip = bwd(i, layer, params.tensors, caches[i], dy)
        for name, g in dparams.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for {name}", i)
            grads[name] = g
        if dskip is not None:
            src = layer.source
            pending[src] = dskip if pending[src] is None else pending[src] + dskip
        dy = dx
    ordered = {n: grads[n] for n in params.trainable()}
    return BackwardResult(float(loss) * loss_scale, ordered, running)


@dataclass
class Network:
    """A layer chain with its parameters and the per-sample input shape it was built for."""
    spec: Spec
    params: ModelParams
    input_shape: Tuple[int, ...]
    task: str = ""

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return forward(self.params, self.spec, batch)

    @property
    def tile(self) -> int:
        return int(self.input_shape[-1])


__all__ = [
    "ModelParams", "BackwardResult", "Network", "Spec", "encoder", "tracer_spec", "grower_spec",
    "dense_spec", "encoder_length", "infer_shapes", "init_params", "count_params",
    "activation_bytes", "forward", "backward", "STATE_NAMES",
]
