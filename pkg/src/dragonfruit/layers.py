"""Neural-net layer primitives: forward passes and analytic gradients.

Image tensors are channels-last (H, W, C); every op also accepts a leading batch
axis and returns results with the same rank it was given. Ops preserve the input
dtype so a float64 shadow pass (used by finite-difference checks) runs through
the exact same code as the float32 production path.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, ShapeError

EPS_LOG = 1e-7  # floor inside log() for cross-entropy


class Padding(Enum):
    SAME = "same"
    VALID = "valid"


class DropoutMode(Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class ConvParams:
    """Square-kernel convolution parameters, weights laid out [k, k, c_in, c_out]."""

    weights: np.ndarray
    bias: np.ndarray
    padding: Padding = Padding.SAME
    stride: int = 1

    def __post_init__(self) -> None:
        if self.weights.ndim != 4 or self.weights.shape[0] != self.weights.shape[1]:
            raise ShapeError(f"conv weights must be [k, k, c_in, c_out], got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[3],):
            raise ShapeError(f"conv bias must be [c_out], got {self.bias.shape}")
        if self.stride != 1:
            raise ConfigError("only stride 1 is supported")

    @property
    def kernel(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseParams:
    """Fully-connected parameters, weights laid out [n_in, n_out]."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.ndim != 2:
            raise ShapeError(f"dense weights must be [n_in, n_out], got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(f"dense bias must be [n_out], got {self.bias.shape}")


@dataclass
class DropoutConfig:
    rate: float = 0.5
    mode: DropoutMode = DropoutMode.TRAIN

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass
class PoolIndices:
    """Winner locations from a maxpool forward pass.

    flat[...] is the row-major index of the winning element inside one sample's
    (H, W, C) block, used to route gradients straight back to the winners.
    """

    input_hwc: tuple[int, int, int]
    flat: np.ndarray  # int64, [B?, Ho, Wo, C]
    batched: bool


def _as_batch(x: np.ndarray, rank: int, what: str) -> tuple[np.ndarray, bool]:
    """Promote a single sample to a batch of one; remember which it was."""
    if x.ndim == rank:
        return x[None, ...], False
    if x.ndim == rank + 1:
        return x, True
    raise ShapeError(f"{what} expects rank {rank} or {rank + 1}, got shape {x.shape}")


def _pad_same(k: int) -> tuple[int, int]:
    # total padding k-1; the extra cell (even k) goes after, not before
    before = (k - 1) // 2
    return before, (k - 1) - before


def _padded(xb: np.ndarray, p: ConvParams) -> np.ndarray:
    if p.padding is Padding.SAME:
        lo, hi = _pad_same(p.kernel)
        return np.pad(xb, ((0, 0), (lo, hi), (lo, hi), (0, 0)))
    return xb


def conv2d_out_hw(h: int, w: int, p: ConvParams) -> tuple[int, int]:
    if p.padding is Padding.SAME:
        return h, w
    k = p.kernel
    if h < k or w < k:
        raise ShapeError(f"valid conv needs input >= {k}x{k}, got {h}x{w}")
    return h - k + 1, w - k + 1


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Cross-correlate x [B?, H, W, c_in] with p.weights, add bias.

    Same padding keeps H x W (zero fill); valid shrinks by k-1. Implemented as
    one im2col + GEMM per call.
    """
    xb, batched = _as_batch(x, 3, "conv2d")
    b, h, w, c_in = xb.shape
    k = p.kernel
    if c_in != p.weights.shape[2]:
        raise ShapeError(f"input has {c_in} channels, weights expect {p.weights.shape[2]}")
    ho, wo = conv2d_out_hw(h, w, p)
    c_out = p.weights.shape[3]

    xp = _padded(xb, p)
    cols = np.empty((b, ho, wo, k, k, c_in), dtype=xb.dtype)
    for dy in range(k):
        for dx in range(k):
            cols[:, :, :, dy, dx, :] = xp[:, dy:dy + ho, dx:dx + wo, :]
    out = cols.reshape(b * ho * wo, k * k * c_in) @ p.weights.reshape(k * k * c_in, c_out)
    out += p.bias
    out = out.reshape(b, ho, wo, c_out)
    return out if batched else out[0]


def conv2d_gradients(
    grad_out: np.ndarray, x: np.ndarray, p: ConvParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss wrt conv input, weights, and bias.

    grad_out must have the exact shape conv2d_forward(x, p) produced.
    """
    xb, batched = _as_batch(x, 3, "conv2d")
    gb_out, g_batched = _as_batch(grad_out, 3, "conv2d grad")
    if g_batched != batched or gb_out.shape[0] != xb.shape[0]:
        raise ShapeError("grad_out batch does not match input batch")
    b, h, w, c_in = xb.shape
    k = p.kernel
    ho, wo = conv2d_out_hw(h, w, p)
    c_out = p.weights.shape[3]
    if gb_out.shape[1:] != (ho, wo, c_out):
        raise ShapeError(f"grad_out shape {gb_out.shape[1:]} != forward output {(ho, wo, c_out)}")

    xp = _padded(xb, p)
    g_mat = gb_out.reshape(b * ho * wo, c_out)

    grad_b = gb_out.sum(axis=(0, 1, 2))
    grad_w = np.empty_like(p.weights)
    grad_xp = np.zeros_like(xp)
    for dy in range(k):
        for dx in range(k):
            patch = xp[:, dy:dy + ho, dx:dx + wo, :].reshape(b * ho * wo, c_in)
            grad_w[dy, dx] = patch.T @ g_mat
            # full correlation: scatter grad_out back over each kernel offset
            grad_xp[:, dy:dy + ho, dx:dx + wo, :] += gb_out @ p.weights[dy, dx].T

    if p.padding is Padding.SAME:
        lo, _ = _pad_same(k)
        grad_x = grad_xp[:, lo:lo + h, lo:lo + w, :]
    else:
        grad_x = grad_xp
    return (grad_x if batched else grad_x[0]), grad_w, grad_b


def maxpool_forward(
    x: np.ndarray, window: int = 2, stride: int = 2
) -> tuple[np.ndarray, PoolIndices]:
    """Max over non-overlapping window x window tiles, floor semantics.

    Trailing rows/cols that do not fill a tile are dropped. Ties go to the
    first element in row-major window order. Returns the pooled map plus the
    winner indices needed by maxpool_backward.
    """
    if window != stride:
        raise ConfigError("only window == stride pooling is supported")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    xb, batched = _as_batch(x, 3, "maxpool")
    b, h, w, c = xb.shape
    if h < window or w < window:
        raise ShapeError(f"maxpool needs input >= {window}x{window}, got {h}x{w}")
    ho, wo = h // window, w // window

    tiles = xb[:, : ho * window, : wo * window, :]
    tiles = tiles.reshape(b, ho, window, wo, window, c)
    tiles = tiles.transpose(0, 1, 3, 5, 2, 4).reshape(b, ho, wo, c, window * window)
    codes = tiles.argmax(axis=-1)  # first max wins
    out = tiles.max(axis=-1)

    dy, dx = codes // window, codes % window
    ys = np.arange(ho, dtype=np.int64)[None, :, None, None] * window + dy
    xs = np.arange(wo, dtype=np.int64)[None, None, :, None] * window + dx
    cs = np.arange(c, dtype=np.int64)[None, None, None, :]
    flat = (ys * w + xs) * c + cs

    idx = PoolIndices((h, w, c), flat if batched else flat[0], batched)
    return (out if batched else out[0]), idx


def maxpool_backward(grad_out: np.ndarray, indices: PoolIndices) -> np.ndarray:
    """Route each pooled gradient to its winning input element; losers get zero."""
    gb, batched = _as_batch(grad_out, 3, "maxpool grad")
    flat = indices.flat if indices.batched else indices.flat[None, ...]
    if batched != indices.batched or gb.shape != flat.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match stored indices")
    b = gb.shape[0]
    h, w, c = indices.input_hwc
    grad_flat = np.zeros((b, h * w * c), dtype=gb.dtype)
    np.put_along_axis(grad_flat, flat.reshape(b, -1), gb.reshape(b, -1), axis=1)
    grad_x = grad_flat.reshape(b, h, w, c)
    return grad_x if batched else grad_x[0]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad shape {grad_out.shape} != input shape {x.shape}")
    return grad_out * (x > 0)


def dense_forward(x: np.ndarray, p: DenseParams) -> np.ndarray:
    """x [B?, n_in] @ weights [n_in, n_out] + bias."""
    xb, batched = _as_batch(x, 1, "dense")
    if xb.shape[1] != p.weights.shape[0]:
        raise ShapeError(f"dense input width {xb.shape[1]} != weights n_in {p.weights.shape[0]}")
    out = xb @ p.weights + p.bias
    return out if batched else out[0]


def dense_gradients(
    grad_out: np.ndarray, x: np.ndarray, p: DenseParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xb, batched = _as_batch(x, 1, "dense")
    gb, g_batched = _as_batch(grad_out, 1, "dense grad")
    if g_batched != batched or gb.shape != (xb.shape[0], p.weights.shape[1]):
        raise ShapeError(f"dense grad shape {grad_out.shape} does not match output")
    grad_x = gb @ p.weights.T
    grad_w = xb.T @ gb
    grad_b = gb.sum(axis=0)
    return (grad_x if batched else grad_x[0]), grad_w, grad_b


def dropout(
    x: np.ndarray, cfg: DropoutConfig, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).

    Train mode needs a generator and returns the keep mask for the backward
    pass; infer mode is the exact identity and returns no mask.
    """
    if cfg.mode is DropoutMode.INFER:
        return x, None
    if rng is None:
        raise ConfigError("train-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= cfg.rate
    out = x * keep
    if cfg.rate > 0.0:
        out /= x.dtype.type(1.0 - cfg.rate)
    return out, keep


def dropout_backward(grad_out: np.ndarray, mask: np.ndarray, cfg: DropoutConfig) -> np.ndarray:
    if mask is None or mask.shape != grad_out.shape:
        raise ShapeError("dropout backward needs the mask from the forward pass")
    grad = grad_out * mask
    if cfg.rate > 0.0:
        grad /= grad_out.dtype.type(1.0 - cfg.rate)
    return grad


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max is subtracted before exponentiation)."""
    zb, batched = _as_batch(z, 1, "softmax")
    shifted = zb - zb.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out if batched else out[0]


def _check_one_hot(target: np.ndarray) -> np.ndarray:
    tb, _ = _as_batch(target, 1, "target")
    ok = np.all((tb == 0) | (tb == 1)) and np.all(tb.sum(axis=1) == 1)
    if not ok:
        raise ValueError("target must be one-hot (single 1, rest 0)")
    return tb


def cross_entropy(probs: np.ndarray, target: np.ndarray, eps: float = EPS_LOG) -> float:
    """Categorical cross-entropy -sum(t * log(p + eps)); batch input gives the mean."""
    pb, batched = _as_batch(probs, 1, "probs")
    tb = _check_one_hot(target)
    if pb.shape != tb.shape:
        raise ShapeError(f"probs {probs.shape} and target {target.shape} differ")
    losses = -(tb * np.log(pb + pb.dtype.type(eps))).sum(axis=1)
    return float(losses.mean() if batched else losses[0])


def softmax_ce_grad(probs: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of cross_entropy(softmax(z), t) wrt the logits z: probs - target."""
    tb = _check_one_hot(target)
    if probs.shape != target.shape:
        raise ShapeError(f"probs {probs.shape} and target {target.shape} differ")
    return probs - tb.reshape(target.shape)
