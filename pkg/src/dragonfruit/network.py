"""Network assembly: canonical layer stack, init, batched forward/backward.

The canonical grading net is ten 3x3/5x5 conv+relu pairs in five blocks, each
block closed by a 2x2 maxpool, then dropout, flatten, a relu dense layer,
dropout again, and a 4-way softmax head. A width multiplier in (0, 1] scales
every channel/unit count (rounded up) for desk-scale runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from . import layers
from .errors import ConfigError, ShapeError, StateError
from .layers import ConvParams, DenseParams, DropoutConfig, DropoutMode, Padding


class ClassLabel(IntEnum):
    DEFECT = 0
    FRESH = 1
    IMMATURE = 2
    MATURE = 3


CLASS_NAMES: tuple[str, ...] = tuple(label.name.lower() for label in ClassLabel)
NUM_CLASSES = len(ClassLabel)
INPUT_SHAPE = (256, 256, 3)


class Mode(Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass(frozen=True)
class LayerSpec:
    """One layer in a network description; unused fields stay at their zero value."""

    kind: str  # conv | relu | pool | dropout | flatten | dense | softmax
    out_channels: int = 0
    kernel: int = 0
    padding: str = ""  # "same" | "valid"
    units: int = 0
    rate: float = 0.0


def conv_spec(out_channels: int, kernel: int, padding: str) -> LayerSpec:
    return LayerSpec("conv", out_channels=out_channels, kernel=kernel, padding=padding)


RELU = LayerSpec("relu")
POOL = LayerSpec("pool")
FLATTEN = LayerSpec("flatten")
SOFTMAX = LayerSpec("softmax")


def canonical_layer_specs(width: float = 1.0) -> list[LayerSpec]:
    """The full grading stack with channel/unit counts scaled by width (ceil)."""
    if not 0.0 < width <= 1.0:
        raise ConfigError(f"width must be in (0, 1], got {width}")

    def scaled(n: int) -> int:
        return math.ceil(n * width)

    specs: list[LayerSpec] = []
    for base, kernel in ((32, 3), (64, 3), (128, 3), (256, 3), (512, 5)):
        specs += [
            conv_spec(scaled(base), kernel, "same"), RELU,
            conv_spec(scaled(base), kernel, "valid"), RELU,
            POOL,
        ]
    specs += [
        LayerSpec("dropout", rate=0.5),
        FLATTEN,
        LayerSpec("dense", units=scaled(1536)), RELU,
        LayerSpec("dropout", rate=0.5),
        LayerSpec("dense", units=NUM_CLASSES),
        SOFTMAX,
    ]
    return specs


@dataclass
class Network:
    layers: list[LayerSpec]
    params: list[tuple[np.ndarray, np.ndarray] | None]  # (weights, bias) per layer
    width: float = 1.0
    input_shape: tuple[int, int, int] = INPUT_SHAPE


@dataclass
class NetworkCache:
    """Everything backward() needs from a train-mode forward pass."""

    inputs: list[np.ndarray]  # input seen by each layer
    aux: list[object]  # PoolIndices / dropout masks, None elsewhere
    probs: np.ndarray
    batch: int


def _layer_out_shape(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    kind = spec.kind
    if kind == "conv":
        if len(in_shape) != 3:
            raise ShapeError(f"conv needs HxWxC input, got {in_shape}")
        h, w, _ = in_shape
        p = spec.padding
        if p == "same":
            return (h, w, spec.out_channels)
        if p == "valid":
            if h < spec.kernel or w < spec.kernel:
                raise ShapeError(f"valid conv kernel {spec.kernel} exceeds input {h}x{w}")
            return (h - spec.kernel + 1, w - spec.kernel + 1, spec.out_channels)
        raise ConfigError(f"unknown padding {p!r}")
    if kind == "pool":
        h, w, c = in_shape
        if h < 2 or w < 2:
            raise ShapeError(f"pool needs input >= 2x2, got {h}x{w}")
        return (h // 2, w // 2, c)
    if kind == "flatten":
        return (math.prod(in_shape),)
    if kind == "dense":
        if len(in_shape) != 1:
            raise ShapeError(f"dense needs flat input, got {in_shape}")
        return (spec.units,)
    if kind in ("relu", "dropout", "softmax"):
        return in_shape
    raise ConfigError(f"unknown layer kind {spec.kind!r}")


def _init_params(
    specs: list[LayerSpec],
    input_shape: tuple[int, int, int],
    rng: np.random.Generator,
    dtype: np.dtype,
) -> list[tuple[np.ndarray, np.ndarray] | None]:
    """Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases."""
    params: list[tuple[np.ndarray, np.ndarray] | None] = []
    shape = tuple(input_shape)
    for spec in specs:
        if spec.kind == "conv":
            c_in, c_out, k = shape[2], spec.out_channels, spec.kernel
            fan_in, fan_out = k * k * c_in, k * k * c_out
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, (k, k, c_in, c_out)).astype(dtype)
            params.append((w, np.zeros(c_out, dtype=dtype)))
        elif spec.kind == "dense":
            n_in, n_out = shape[0], spec.units
            limit = math.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, (n_in, n_out)).astype(dtype)
            params.append((w, np.zeros(n_out, dtype=dtype)))
        else:
            params.append(None)
        shape = _layer_out_shape(spec, shape)
    return params


def build_from_specs(
    specs: list[LayerSpec],
    input_shape: tuple[int, int, int] = INPUT_SHAPE,
    seed: int = 0,
    width: float = 1.0,
    dtype: np.dtype = np.float32,
) -> Network:
    """Initialize a network for an arbitrary layer description (seeded)."""
    rng = np.random.default_rng(seed)
    params = _init_params(specs, input_shape, rng, np.dtype(dtype))
    return Network(list(specs), params, width=width, input_shape=tuple(input_shape))


def build_network(width: float = 1.0, seed: int = 0) -> Network:
    """Initialize the canonical 256x256x3 grading network at the given width."""
    return build_from_specs(canonical_layer_specs(width), INPUT_SHAPE, seed=seed, width=width)


def shape_trace(net: Network, input_shape: tuple[int, ...] | None = None) -> list[tuple[int, ...]]:
    """Per-layer output shapes for the given (default: the network's) input shape."""
    shape = tuple(input_shape if input_shape is not None else net.input_shape)
    trace = []
    for spec in net.layers:
        shape = _layer_out_shape(spec, shape)
        trace.append(shape)
    return trace


def layer_param_counts(net: Network) -> list[int]:
    return [0 if p is None else p[0].size + p[1].size for p in net.params]


def total_parameters(net: Network) -> int:
    return sum(layer_param_counts(net))


def _conv_params(spec: LayerSpec, p: tuple[np.ndarray, np.ndarray]) -> ConvParams:
    pad = Padding.SAME if spec.padding == "same" else Padding.VALID
    return ConvParams(p[0], p[1], padding=pad)


def _run(
    net: Network,
    x: np.ndarray,
    mode: Mode,
    rng: np.random.Generator | None,
    keep_cache: bool,
) -> tuple[np.ndarray, NetworkCache | None]:
    xb, _ = layers._as_batch(x, 3, "network input")
    if xb.shape[1:] != net.input_shape:
        raise ShapeError(f"expected input {net.input_shape}, got {tuple(xb.shape[1:])}")
    if mode is Mode.TRAIN and rng is None:
        raise ConfigError("train-mode forward needs a random generator for dropout")

    inputs: list[np.ndarray] = []
    aux: list[object] = []
    cur = xb
    for spec, p in zip(net.layers, net.params):
        if keep_cache:
            inputs.append(cur)
        extra: object = None
        kind = spec.kind
        if kind == "conv":
            cur = layers.conv2d_forward(cur, _conv_params(spec, p))
        elif kind == "relu":
            cur = layers.relu(cur)
        elif kind == "pool":
            cur, extra = layers.maxpool_forward(cur)
        elif kind == "dropout":
            if mode is Mode.TRAIN:
                cfg = DropoutConfig(spec.rate, DropoutMode.TRAIN)
                cur, extra = layers.dropout(cur, cfg, rng)
            # infer mode: exact identity
        elif kind == "flatten":
            cur = cur.reshape(cur.shape[0], -1)
        elif kind == "dense":
            cur = layers.dense_forward(cur, DenseParams(p[0], p[1]))
        elif kind == "softmax":
            cur = layers.softmax(cur)
        else:
            raise ConfigError(f"unknown layer kind {kind!r}")
        if keep_cache:
            aux.append(extra)

    cache = NetworkCache(inputs, aux, cur, xb.shape[0]) if keep_cache else None
    return cur, cache


def forward(
    net: Network,
    x: np.ndarray,
    mode: Mode = Mode.INFER,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class probabilities for x [B?, H, W, C]; rows sum to 1."""
    xb, batched = layers._as_batch(x, 3, "network input")
    probs, _ = _run(net, xb, mode, rng, keep_cache=False)
    return probs if batched else probs[0]


def forward_train(
    net: Network, x: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, NetworkCache]:
    """Train-mode forward (dropout active) that caches state for backward()."""
    xb, _ = layers._as_batch(x, 3, "network input")
    probs, cache = _run(net, xb, Mode.TRAIN, rng, keep_cache=True)
    return probs, cache


def backward(
    net: Network, cache: NetworkCache, targets: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray] | None]:
    """Parameter gradients of the mean cross-entropy loss over the cached batch.

    Returns one (grad_weights, grad_bias) per parametric layer, aligned with
    net.params. The softmax head and the loss fold into probs - targets.
    """
    if cache is None or len(cache.inputs) != len(net.layers):
        raise StateError("backward needs the cache from forward_train")
    if targets.shape != cache.probs.shape:
        raise ShapeError(f"targets {targets.shape} != probs {cache.probs.shape}")
    if net.layers[-1].kind != "softmax":
        raise ConfigError("backward expects a softmax head")

    grads: list[tuple[np.ndarray, np.ndarray] | None] = [None] * len(net.layers)
    dtype = cache.probs.dtype
    g = layers.softmax_ce_grad(cache.probs, targets.astype(dtype)) / dtype.type(cache.batch)

    for i in range(len(net.layers) - 2, -1, -1):
        spec, p, x_in = net.layers[i], net.params[i], cache.inputs[i]
        kind = spec.kind
        if kind == "conv":
            g, gw, gb = layers.conv2d_gradients(g, x_in, _conv_params(spec, p))
            grads[i] = (gw, gb)
        elif kind == "relu":
            g = layers.relu_backward(g, x_in)
        elif kind == "pool":
            g = layers.maxpool_backward(g, cache.aux[i])
        elif kind == "dropout":
            mask = cache.aux[i]
            if mask is not None:
                g = layers.dropout_backward(g, mask, DropoutConfig(spec.rate, DropoutMode.TRAIN))
        elif kind == "flatten":
            g = g.reshape(x_in.shape)
        elif kind == "dense":
            g, gw, gb = layers.dense_gradients(g, x_in, DenseParams(p[0], p[1]))
            grads[i] = (gw, gb)
        else:
            raise ConfigError(f"unknown layer kind {kind!r}")
    return grads
