"""
Differentiable operations used by the SqueezeNet and ResNet-50 builders.

Each op validates shapes, computes the forward result with numpy and records a
backward rule returning one gradient per parent (``None`` where not needed).
Convolution uses the cross-correlation convention (no kernel flip).
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContractError, DegenerateBatchError, LabelError, ShapeError
from .im2col import col2im, im2col, output_size
from .tensor import Tensor, get_default_dtype

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise ShapeError(message)


def _expect_rank(t: Tensor, rank: int, name: str) -> None:
    _expect(t.ndim == rank, f"{name} must have rank {rank}, got shape {t.shape}")


# ================= CONVOLUTION =================

def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0) -> Tensor:
    _expect_rank(x, 4, "conv2d input")
    _expect_rank(weight, 4, "conv2d weight")
    n, c, h, w = x.shape
    f, wc, kh, kw = weight.shape
    _expect(c == wc, f"conv2d channel mismatch: input has {c} channels, weight expects {wc}")
    _expect(stride >= 1 and padding >= 0, f"conv2d needs stride >= 1 and padding >= 0 (got {stride}, {padding})")
    _expect(h + 2 * padding >= kh and w + 2 * padding >= kw,
            f"conv2d kernel {kh}x{kw} is larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    if bias is not None:
        _expect(bias.shape == (f,), f"conv2d bias must have shape ({f},), got {bias.shape}")

    cols, out_h, out_w = im2col(x.data, kh, kw, stride, padding)
    wmat = weight.data.reshape(f, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = out.reshape(n, out_h, out_w, f).transpose(0, 3, 1, 2)

    def _backward(grad):
        gmat = grad.transpose(0, 2, 3, 1).reshape(-1, f)
        dx = col2im(gmat @ wmat, x.shape, kh, kw, stride, padding) if x.requires_grad else None
        dw = (gmat.T @ cols).reshape(weight.shape) if weight.requires_grad else None
        if bias is None:
            return dx, dw
        return dx, dw, gmat.sum(axis=0) if bias.requires_grad else None

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op("conv2d", out, parents, _backward, stride=stride, padding=padding)


# ================= POOLING =================

def maxpool2d(x: Tensor, k: int, stride: int) -> Tensor:
    """Max over k×k windows. Ties go to the first element in row-major window order."""
    _expect_rank(x, 4, "maxpool2d input")
    n, c, h, w = x.shape
    _expect(k >= 1 and stride >= 1, f"maxpool2d needs k >= 1 and stride >= 1 (got {k}, {stride})")
    _expect(h >= k and w >= k, f"maxpool2d window {k}x{k} exceeds input {h}x{w}")

    windows = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    flat = windows.reshape(n, c, out_h, out_w, k * k)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

    def _backward(grad):
        rows = (np.arange(out_h) * stride)[None, None, :, None] + argmax // k
        cols = (np.arange(out_w) * stride)[None, None, None, :] + argmax % k
        batch = np.arange(n)[:, None, None, None]
        channel = np.arange(c)[None, :, None, None]
        dx = np.zeros_like(x.data)
        np.add.at(dx, (batch, channel, rows, cols), grad)
        return (dx,)

    return Tensor.from_op("maxpool2d", out, (x,), _backward, k=k, stride=stride)


def global_avg_pool(x: Tensor) -> Tensor:
    _expect_rank(x, 4, "global_avg_pool input")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def _backward(grad):
        spread = np.broadcast_to(grad[:, :, None, None] / (h * w), x.shape)
        return (np.array(spread, dtype=x.dtype),)

    return Tensor.from_op("global_avg_pool", out, (x,), _backward)


# ================= ELEMENTWISE =================

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)

    def _backward(grad):
        return (grad * mask,)

    return Tensor.from_op("relu", out, (x,), _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _expect(a.shape == b.shape, f"add shape mismatch: {a.shape} vs {b.shape}")

    def _backward(grad):
        return grad, grad

    return Tensor.from_op("add", a.data + b.data, (a, b), _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _expect(a.shape == b.shape, f"mul shape mismatch: {a.shape} vs {b.shape}")

    def _backward(grad):
        return grad * b.data, grad * a.data

    return Tensor.from_op("mul", a.data * b.data, (a, b), _backward)


def square(x: Tensor) -> Tensor:
    def _backward(grad):
        return (2.0 * x.data * grad,)

    return Tensor.from_op("square", x.data * x.data, (x,), _backward)


def sum_all(x: Tensor) -> Tensor:
    def _backward(grad):
        return (np.full_like(x.data, grad),)

    return Tensor.from_op("sum", np.asarray(x.data.sum(), dtype=x.dtype), (x,), _backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    _expect_rank(a, 4, "concat_channels input")
    _expect_rank(b, 4, "concat_channels input")
    _expect(a.shape[0] == b.shape[0] and a.shape[2:] == b.shape[2:],
            f"concat_channels batch/spatial mismatch: {a.shape} vs {b.shape}")
    split = a.shape[1]

    def _backward(grad):
        return grad[:, :split], grad[:, split:]

    return Tensor.from_op("concat_channels", np.concatenate([a.data, b.data], axis=1), (a, b), _backward)


def flatten(x: Tensor) -> Tensor:
    shape = x.shape

    def _backward(grad):
        return (grad.reshape(shape),)

    return Tensor.from_op("flatten", x.data.reshape(shape[0], -1), (x,), _backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-p) in training and is the identity otherwise."""
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def _backward(grad):
        return (grad * mask,)

    return Tensor.from_op("dropout", x.data * mask, (x,), _backward, p=p)


# ================= NORMALIZATION =================

@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def create(cls, channels: int, dtype=None) -> "RunningStats":
        dtype = dtype or get_default_dtype()
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


def batch_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_stats: RunningStats,
                 mode: str = "train", eps: float = BN_EPS) -> Tensor:
    """
    Per-channel normalisation over (N, H, W).
    Train mode uses batch statistics and updates the running stats in place (running
    variance uses the unbiased estimate); eval mode normalises with the running stats.
    """
    _expect_rank(x, 4, "batch_norm2d input")
    n, c, h, w = x.shape
    _expect(gamma.shape == (c,) and beta.shape == (c,), f"batch_norm2d affine params must have shape ({c},)")
    if mode not in ("train", "eval"):
        raise ContractError(f"batch_norm2d mode must be 'train' or 'eval', got '{mode}'")

    axes = (0, 2, 3)
    count = n * h * w
    g4 = gamma.data[None, :, None, None]

    if mode == "train":
        if count < 2:
            raise DegenerateBatchError(f"batch_norm2d needs at least 2 values per channel in train mode, got {count}")
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        momentum = running_stats.momentum
        running_stats.mean *= 1.0 - momentum
        running_stats.mean += momentum * mean
        running_stats.var *= 1.0 - momentum
        running_stats.var += momentum * var * (count / (count - 1))
    else:
        mean = running_stats.mean
        var = running_stats.var

    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    x_hat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = g4 * x_hat + beta.data[None, :, None, None]

    def _backward(grad):
        dgamma = (grad * x_hat).sum(axis=axes) if gamma.requires_grad else None
        dbeta = grad.sum(axis=axes) if beta.requires_grad else None
        dx = None
        if x.requires_grad:
            dx_hat = grad * g4
            if mode == "train":
                dx = (inv_std[None, :, None, None] / count) * (
                    count * dx_hat
                    - dx_hat.sum(axis=axes, keepdims=True)
                    - x_hat * (dx_hat * x_hat).sum(axis=axes, keepdims=True)
                )
            else:
                dx = dx_hat * inv_std[None, :, None, None]
        return dx, dgamma, dbeta

    return Tensor.from_op("batch_norm2d", out, (x, gamma, beta), _backward, mode=mode)


# ================= DENSE HEAD AND LOSS =================

def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    _expect_rank(x, 2, "dense input")
    _expect_rank(weight, 2, "dense weight")
    _expect(x.shape[1] == weight.shape[0], f"dense dimension mismatch: input {x.shape} vs weight {weight.shape}")
    out = x.data @ weight.data
    if bias is not None:
        _expect(bias.shape == (weight.shape[1],), f"dense bias must have shape ({weight.shape[1]},), got {bias.shape}")
        out = out + bias.data

    def _backward(grad):
        dx = grad @ weight.data.T if x.requires_grad else None
        dw = x.data.T @ grad if weight.requires_grad else None
        if bias is None:
            return dx, dw
        return dx, dw, grad.sum(axis=0) if bias.requires_grad else None

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op("dense", out, parents, _backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits) -> np.ndarray:
    """Row-wise probabilities (not differentiable)."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return np.exp(log_softmax(data))


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], stabilised by max-subtraction."""
    _expect_rank(logits, 2, "softmax_cross_entropy logits")
    n, k = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    _expect(labels.shape == (n,), f"Expected {n} labels, got {labels.shape[0]}")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelError(f"Labels must be in [0, {k}), got range [{labels.min()}, {labels.max()}]")

    log_probs = log_softmax(logits.data)
    rows = np.arange(n)
    loss = np.asarray(-log_probs[rows, labels].mean(), dtype=logits.dtype)

    def _backward(grad):
        dlogits = np.exp(log_probs)
        dlogits[rows, labels] -= 1.0
        return (dlogits * (grad / n),)

    return Tensor.from_op("softmax_cross_entropy", loss, (logits,), _backward)


__all__ = [
    "RunningStats",
    "add",
    "batch_norm2d",
    "concat_channels",
    "conv2d",
    "dense",
    "dropout",
    "flatten",
    "global_avg_pool",
    "log_softmax",
    "maxpool2d",
    "mul",
    "output_size",
    "relu",
    "softmax",
    "softmax_cross_entropy",
    "square",
    "sum_all",
]
