from __future__ import annotations
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Literal, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, softmax

from leaf_pheno.errors import ShapeError

# ---- Tunables ----------------------------------------------------------------
LEAKY_SLOPE = 0.01       # negative slope of every leaky_relu
BN_MOMENTUM = 0.1        # running-average momentum at inference
BN_EPS = 1e-5

LayerKind = Literal[
    "conv3x3", "batchnorm", "leaky_relu", "maxpool2", "residual_add",
    "conv_head", "transpose_conv2", "sigmoid", "softmax_channel", "concat_skip",
]

# Kinds that own trainable tensors, and the tensor names they own.
PARAM_NAMES: Dict[str, Tuple[str, ...]] = {
    "conv3x3": ("weight", "bias"),
    "conv_head": ("weight", "bias"),
    "transpose_conv2": ("weight", "bias"),
    "batchnorm": ("gamma", "beta"),
}
STATE_NAMES: Dict[str, Tuple[str, ...]] = {
    "batchnorm": ("running_mean", "running_var"),
}


@dataclass(frozen=True)
class LayerSpec:
    """One link in a sequential layer chain.

    `source` names an earlier layer index whose output is joined in
    (residual_add adds it, concat_skip appends it on the channel axis).
    `kernel` is the spatial extent consumed by conv_head and `out_shape`
    the per-sample shape it reshapes to.
    """
    kind: LayerKind
    channels_in: int = 0
    channels_out: int = 0
    negative_slope: float = LEAKY_SLOPE
    source: Optional[int] = None
    kernel: Tuple[int, int] = (0, 0)
    out_shape: Tuple[int, ...] = ()
    zero_init: bool = False

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["kernel"] = list(self.kernel)
        d["out_shape"] = list(self.out_shape)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "LayerSpec":
        d = dict(d)
        d["kernel"] = tuple(d.get("kernel", (0, 0)))
        d["out_shape"] = tuple(d.get("out_shape", ()))
        return cls(**d)


@dataclass
class Cache:
    """Whatever a forward kernel needs to run its backward."""
    x_shape: Tuple[int, ...]
    saved: Dict[str, Any] = field(default_factory=dict)


def pname(index: int, name: str) -> str:
    return f"{index}.{name}"


# ---------------------------------------------------------------------------
# Shape inference
# ---------------------------------------------------------------------------

def output_shape(index: int, layer: LayerSpec, shape: Tuple[int, ...],
                 skip_shape: Optional[Tuple[int, ...]] = None) -> Tuple[int, ...]:
    """Per-sample output shape (no batch axis) of `layer` given its input shape."""
    k = layer.kind
    if k in ("conv3x3", "batchnorm"):
        if len(shape) != 3 or shape[0] != layer.channels_in:
            raise ShapeError(f"layer {index} ({k}) expects {layer.channels_in} channels, got {shape}", index)
        return (layer.channels_out if k == "conv3x3" else shape[0], shape[1], shape[2])
    if k in ("leaky_relu", "sigmoid"):
        return shape
    if k == "softmax_channel":
        if len(shape) < 2:
            raise ShapeError(f"layer {index} (softmax_channel) needs a class axis, got {shape}", index)
        return shape
    if k == "maxpool2":
        if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
            raise ShapeError(f"layer {index} (maxpool2) needs even spatial dims, got {shape}", index)
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if k == "transpose_conv2":
        if len(shape) != 3 or shape[0] != layer.channels_in:
            raise ShapeError(f"layer {index} (transpose_conv2) expects {layer.channels_in} channels, got {shape}", index)
        return (layer.channels_out, shape[1] * 2, shape[2] * 2)
    if k == "residual_add":
        if skip_shape != shape:
            raise ShapeError(f"layer {index} (residual_add) joins {shape} with {skip_shape}", index)
        return shape
    if k == "concat_skip":
        if skip_shape is None or skip_shape[1:] != shape[1:]:
            raise ShapeError(f"layer {index} (concat_skip) joins {shape} with {skip_shape}", index)
        return (shape[0] + skip_shape[0],) + shape[1:]
    if k == "conv_head":
        expect = (layer.channels_in,) + tuple(layer.kernel)
        if tuple(shape) != expect:
            raise ShapeError(f"layer {index} (conv_head) expects {expect}, got {shape}", index)
        if int(np.prod(layer.out_shape)) != layer.channels_out:
            raise ShapeError(f"layer {index} (conv_head) cannot reshape {layer.channels_out} to {layer.out_shape}", index)
        return tuple(layer.out_shape)
    raise ShapeError(f"layer {index}: unknown kind {k!r}", index)


def param_shapes(index: int, layer: LayerSpec) -> Dict[str, Tuple[int, ...]]:
    k = layer.kind
    if k == "conv3x3":
        return {pname(index, "weight"): (layer.channels_out, layer.channels_in, 3, 3),
                pname(index, "bias"): (layer.channels_out,)}
    if k == "conv_head":
        kh, kw = layer.kernel
        return {pname(index, "weight"): (layer.channels_out, layer.channels_in, kh, kw),
                pname(index, "bias"): (layer.channels_out,)}
    if k == "transpose_conv2":
        return {pname(index, "weight"): (layer.channels_in, layer.channels_out, 2, 2),
                pname(index, "bias"): (layer.channels_out,)}
    if k == "batchnorm":
        c = layer.channels_in
        return {pname(index, "gamma"): (c,), pname(index, "beta"): (c,),
                pname(index, "running_mean"): (c,), pname(index, "running_var"): (c,)}
    return {}


def fan_in(layer: LayerSpec) -> int:
    if layer.kind == "conv3x3":
        return layer.channels_in * 9
    if layer.kind == "conv_head":
        return layer.channels_in * layer.kernel[0] * layer.kernel[1]
    if layer.kind == "transpose_conv2":
        return layer.channels_in * 4
    return 1


# ---------------------------------------------------------------------------
# Forward kernels: (x, skip, params, training) -> (y, cache, running-stat updates)
# ---------------------------------------------------------------------------

def _conv3x3_fwd(i, layer, P, x, skip, training):
    W = P[pname(i, "weight")]; b = P[pname(i, "bias")]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3))          # (B,C,H,W,3,3)
    y = np.tensordot(cols, W, axes=([1, 4, 5], [1, 2, 3]))       # (B,H,W,O)
    y = y.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return y, Cache(x.shape, {"cols": cols}), {}


def _conv3x3_bwd(i, layer, P, cache, dy):
    W = P[pname(i, "weight")]
    cols = cache.saved["cols"]
    dW = np.tensordot(dy, cols, axes=([0, 2, 3], [0, 2, 3]))     # (O,C,3,3)
    db = dy.sum(axis=(0, 2, 3))
    dyp = np.pad(dy, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dcols = sliding_window_view(dyp, (3, 3), axis=(2, 3))        # (B,O,H,W,3,3)
    dx = np.tensordot(dcols, W[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))
    return dx.transpose(0, 3, 1, 2), {pname(i, "weight"): dW, pname(i, "bias"): db}, None


def _bn_axes(x):
    return (0,) + tuple(range(2, x.ndim))


def _bn_view(v, x):
    return v.reshape((1, -1) + (1,) * (x.ndim - 2))


def _batchnorm_fwd(i, layer, P, x, skip, training):
    gamma = P[pname(i, "gamma")]; beta = P[pname(i, "beta")]
    axes = _bn_axes(x)
    updates = {}
    if training:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        n = x.size // x.shape[1]
        unbiased = var * n / max(1, n - 1)
        rm = P[pname(i, "running_mean")]; rv = P[pname(i, "running_var")]
        updates = {pname(i, "running_mean"): (1 - BN_MOMENTUM) * rm + BN_MOMENTUM * mu,
                   pname(i, "running_var"): (1 - BN_MOMENTUM) * rv + BN_MOMENTUM * unbiased}
    else:
        mu = P[pname(i, "running_mean")]; var = P[pname(i, "running_var")]
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - _bn_view(mu, x)) * _bn_view(inv_std, x)
    y = _bn_view(gamma, x) * xhat + _bn_view(beta, x)
    return y, Cache(x.shape, {"xhat": xhat, "inv_std": inv_std, "training": training}), updates


def _batchnorm_bwd(i, layer, P, cache, dy):
    gamma = P[pname(i, "gamma")]
    xhat = cache.saved["xhat"]; inv_std = cache.saved["inv_std"]
    axes = _bn_axes(dy)
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * _bn_view(gamma, dy)
    if cache.saved["training"]:
        n = dy.size // dy.shape[1]
        s1 = _bn_view(dxhat.sum(axis=axes), dy)
        s2 = _bn_view((dxhat * xhat).sum(axis=axes), dy)
        dx = _bn_view(inv_std, dy) / n * (n * dxhat - s1 - xhat * s2)
    else:
        dx = dxhat * _bn_view(inv_std, dy)
    return dx, {pname(i, "gamma"): dgamma, pname(i, "beta"): dbeta}, None


def _leaky_fwd(i, layer, P, x, skip, training):
    slope = layer.negative_slope
    pos = x > 0
    return np.where(pos, x, slope * x), Cache(x.shape, {"pos": pos}), {}


def _leaky_bwd(i, layer, P, cache, dy):
    return np.where(cache.saved["pos"], dy, layer.negative_slope * dy), {}, None


def _maxpool_fwd(i, layer, P, x, skip, training):
    B, C, H, W = x.shape
    win = x.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // 2, W // 2, 4)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, Cache(x.shape, {"idx": idx}), {}


def _maxpool_bwd(i, layer, P, cache, dy):
    B, C, H, W = cache.x_shape
    dwin = np.zeros((B, C, H // 2, W // 2, 4))
    np.put_along_axis(dwin, cache.saved["idx"][..., None], dy[..., None], axis=-1)
    dx = dwin.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H, W)
    return dx, {}, None


def _residual_fwd(i, layer, P, x, skip, training):
    return x + skip, Cache(x.shape), {}


def _residual_bwd(i, layer, P, cache, dy):
    return dy, {}, dy


def _concat_fwd(i, layer, P, x, skip, training):
    return np.concatenate([x, skip], axis=1), Cache(x.shape), {}


def _concat_bwd(i, layer, P, cache, dy):
    c = cache.x_shape[1]
    return dy[:, :c], {}, dy[:, c:]


def _head_fwd(i, layer, P, x, skip, training):
    W = P[pname(i, "weight")]; b = P[pname(i, "bias")]
    B = x.shape[0]
    flat = x.reshape(B, -1)
    y = flat @ W.reshape(W.shape[0], -1).T + b
    return y.reshape((B,) + tuple(layer.out_shape)), Cache(x.shape, {"flat": flat}), {}


def _head_bwd(i, layer, P, cache, dy):
    W = P[pname(i, "weight")]
    B = dy.shape[0]
    dflat = dy.reshape(B, -1)
    dW = (dflat.T @ cache.saved["flat"]).reshape(W.shape)
    db = dflat.sum(axis=0)
    dx = (dflat @ W.reshape(W.shape[0], -1)).reshape(cache.x_shape)
    return dx, {pname(i, "weight"): dW, pname(i, "bias"): db}, None


def _tconv_fwd(i, layer, P, x, skip, training):
    W = P[pname(i, "weight")]; b = P[pname(i, "bias")]
    B, C, H, Wd = x.shape
    t = np.tensordot(x, W, axes=([1], [0]))                      # (B,H,W,O,2,2)
    y = t.transpose(0, 3, 1, 4, 2, 5).reshape(B, W.shape[1], 2 * H, 2 * Wd)
    return y + b[None, :, None, None], Cache(x.shape, {"x": x}), {}


def _tconv_bwd(i, layer, P, cache, dy):
    W = P[pname(i, "weight")]
    x = cache.saved["x"]
    B, C, H, Wd = x.shape
    O = W.shape[1]
    d6 = dy.reshape(B, O, H, 2, Wd, 2).transpose(0, 2, 4, 1, 3, 5)  # (B,H,W,O,2,2)
    dW = np.tensordot(x, d6, axes=([0, 2, 3], [0, 1, 2]))          # (C,O,2,2)
    db = dy.sum(axis=(0, 2, 3))
    dx = np.tensordot(d6, W, axes=([3, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    return dx, {pname(i, "weight"): dW, pname(i, "bias"): db}, None


def _sigmoid_fwd(i, layer, P, x, skip, training):
    y = expit(x)
    return y, Cache(x.shape, {"y": y}), {}


def _sigmoid_bwd(i, layer, P, cache, dy):
    y = cache.saved["y"]
    return dy * y * (1.0 - y), {}, None


def _softmax_fwd(i, layer, P, x, skip, training):
    y = softmax(x, axis=1)
    return y, Cache(x.shape, {"y": y}), {}


def _softmax_bwd(i, layer, P, cache, dy):
    y = cache.saved["y"]
    return y * (dy - (dy * y).sum(axis=1, keepdims=True)), {}, None


KERNELS = {
    "conv3x3": (_conv3x3_fwd, _conv3x3_bwd),
    "batchnorm": (_batchnorm_fwd, _batchnorm_bwd),
    "leaky_relu": (_leaky_fwd, _leaky_bwd),
    "maxpool2": (_maxpool_fwd, _maxpool_bwd),
    "residual_add": (_residual_fwd, _residual_bwd),
    "concat_skip": (_concat_fwd, _concat_bwd),
    "conv_head": (_head_fwd, _head_bwd),
    "transpose_conv2": (_tconv_fwd, _tconv_bwd),
    "sigmoid": (_sigmoid_fwd, _sigmoid_bwd),
    "softmax_channel": (_softmax_fwd, _softmax_bwd),
}
