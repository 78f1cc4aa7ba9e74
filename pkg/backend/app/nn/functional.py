"""
Differentiable layer primitives.

Each function computes its forward result with numpy and registers a local
backward rule through ``record``. All arithmetic is float64.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from app.exceptions import BatchSizeError, ConfigurationError, DimensionError, EncodingError
from app.nn.tensor import DTYPE, Tensor, as_tensor, record

IntPair = Union[int, Tuple[int, int]]

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1
LAYERNORM_EPS = 1e-5


def _pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, tuple):
        return value
    return (value, value)


def output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """floor((size + 2*padding - kernel) / stride) + 1"""
    return (size + 2 * padding - kernel) // stride + 1


# ------------------------------------------------------------------ linear

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> None:
        a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        b._accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return record(a.data @ b.data, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ weight + bias with weight stored as (in_features, out_features)."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear expects width {weight.shape[0]}, got {x.shape[-1]}")
    out = matmul(x, weight)
    return out + bias if bias is not None else out


# ------------------------------------------------------------- activations

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * mask)

    return record(x.data * mask, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x) with Phi(x) = (1 + erf(x / sqrt 2)) / 2."""
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x.data ** 2) / math.sqrt(2.0 * math.pi)

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * (cdf + x.data * pdf))

    return record(x.data * cdf, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    z = x.data
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * out * (1.0 - out))

    return record(out, (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        x._accumulate(s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return record(s, (x,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is 0."""
    if not training or rate <= 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep * scale

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * mask)

    return record(x.data * mask, (x,), backward)


# ---------------------------------------------------------- normalisation

def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYERNORM_EPS) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    n = x.shape[-1]

    def backward(g: np.ndarray) -> None:
        gamma._accumulate(g * xhat)
        beta._accumulate(g)
        dxhat = g * gamma.data
        dx = inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        x._accumulate(dx)

    return record(xhat * gamma.data + beta.data, (x, gamma, beta), backward)


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BATCHNORM_MOMENTUM,
    eps: float = BATCHNORM_EPS,
) -> Tensor:
    """
    Batch normalisation over every axis except axis 1 (features / channels).

    Works for (B, F) and (B, C, H, W) inputs. In training mode the running
    statistics are updated in place with the population batch variance.
    """
    axes = (0,) + tuple(range(2, x.ndim))
    view = [1] * x.ndim
    view[1] = x.shape[1]
    g_view, b_view = gamma.data.reshape(view), beta.data.reshape(view)

    if not training:
        inv_std = 1.0 / np.sqrt(running_var.reshape(view) + eps)
        xhat = (x.data - running_mean.reshape(view)) * inv_std

        def eval_backward(g: np.ndarray) -> None:
            gamma._accumulate((g * xhat).sum(axis=axes))
            beta._accumulate(g.sum(axis=axes))
            x._accumulate(g * g_view * inv_std)

        return record(xhat * g_view + b_view, (x, gamma, beta), eval_backward)

    if x.shape[0] < 2:
        raise BatchSizeError(f"batch norm in train mode needs at least 2 rows, got {x.shape[0]}")
    n = x.data.size // x.shape[1]
    mu = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std

    running_mean *= 1.0 - momentum
    running_mean += momentum * mu.reshape(-1)
    running_var *= 1.0 - momentum
    running_var += momentum * var.reshape(-1)

    def backward(g: np.ndarray) -> None:
        gamma._accumulate((g * xhat).sum(axis=axes))
        beta._accumulate(g.sum(axis=axes))
        dxhat = g * g_view
        dx = inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
        )
        x._accumulate(dx)

    return record(xhat * g_view + b_view, (x, gamma, beta), backward)


# ------------------------------------------------------------ convolution

def conv2d(
    x: Tensor,
    kernels: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: IntPair = 0,
) -> Tensor:
    """
    2-D cross-correlation with zero padding.

    ``x`` is (C_in, H, W) or (B, C_in, H, W); ``kernels`` is (C_out, C_in, kh, kw).
    The kernel is not flipped; trained kernels absorb the difference from
    classical convolution.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 4 or kernels.ndim != 4 or x.shape[1] != kernels.shape[1]:
        raise DimensionError(f"conv2d shape mismatch: input {x.shape}, kernels {kernels.shape}")

    if stride <= 0:
        raise ConfigurationError(f"conv2d stride must be positive, got {stride}")
    ph, pw = _pair(padding)
    c_out, _, kh, kw = kernels.shape
    b, c_in, h, w = x.shape
    ho, wo = output_size(h, kh, stride, ph), output_size(w, kw, stride, pw)
    if ho <= 0 or wo <= 0 or stride <= 0:
        raise ConfigurationError(
            f"conv2d produces empty output: input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    out = np.tensordot(windows, kernels.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)

    parents = (x, kernels) if bias is None else (x, kernels, bias)

    def backward(g: np.ndarray) -> None:
        if kernels.requires_grad:
            kernels._accumulate(np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3])))
        if bias is not None:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dcols = np.tensordot(g, kernels.data, axes=([1], [0]))  # (B, Ho, Wo, C_in, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x._accumulate(gxp[:, :, ph:ph + h, pw:pw + w])

    out_t = record(out, parents, backward)
    return out_t.reshape(out_t.shape[1:]) if squeeze else out_t


def maxpool2d(x: Tensor, k: int, stride: int, padding: int = 0) -> Tensor:
    """
    Max pooling; padded cells never win. Gradient goes to the first maximal
    cell in scan order.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x.reshape((1,) + x.shape)
    b, c, h, w = x.shape
    if stride <= 0 or k <= 0:
        raise ConfigurationError(f"maxpool2d needs positive k and stride, got k={k} stride={stride}")
    ho, wo = output_size(h, k, stride, padding), output_size(w, k, stride, padding)
    if ho <= 0 or wo <= 0 or stride <= 0:
        raise ConfigurationError(
            f"maxpool2d produces empty output: input {h}x{w}, k {k}, stride {stride}, padding {padding}"
        )
    if padding > k // 2:
        raise ConfigurationError(f"maxpool2d padding {padding} exceeds half the window {k}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                constant_values=-np.inf)
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    flat = windows.reshape(b, c, ho, wo, k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray) -> None:
        di, dj = np.divmod(arg, k)
        rows = np.arange(ho).reshape(1, 1, ho, 1) * stride + di
        cols = np.arange(wo).reshape(1, 1, 1, wo) * stride + dj
        bi = np.arange(b).reshape(b, 1, 1, 1)
        ci = np.arange(c).reshape(1, c, 1, 1)
        gxp = np.zeros(xp.shape, dtype=DTYPE)
        np.add.at(gxp, (bi, ci, rows, cols), g)
        x._accumulate(gxp[:, :, padding:padding + h, padding:padding + w])

    out_t = record(out, (x,), backward)
    return out_t.reshape(out_t.shape[1:]) if squeeze else out_t


# ------------------------------------------------------------------ losses

def mse_loss(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise DimensionError("mse_loss needs at least one element")
    diff = pred.data - target.data
    n = diff.size

    def backward(g: np.ndarray) -> None:
        pred._accumulate(g * 2.0 * diff / n)
        target._accumulate(-g * 2.0 * diff / n)

    return record(np.array((diff ** 2).sum() / n), (pred, target), backward)


def one_hot(labels: np.ndarray, classes: int = 2) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, classes), dtype=DTYPE)
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy_loss(logits: Tensor, onehot) -> Tensor:
    """Mean over rows of -sum(onehot * log_softmax(logits))."""
    target = np.asarray(onehot.data if isinstance(onehot, Tensor) else onehot, dtype=DTYPE)
    if logits.shape != target.shape or logits.ndim != 2:
        raise DimensionError(f"cross_entropy_loss shape mismatch: {logits.shape} vs {target.shape}")
    valid = np.isin(target, (0.0, 1.0)).all(axis=1) & (target.sum(axis=1) == 1.0)
    if not valid.all():
        bad = int(np.flatnonzero(~valid)[0])
        raise EncodingError(f"row {bad} is not a one-hot vector: {target[bad].tolist()}")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = logits.shape[0]

    def backward(g: np.ndarray) -> None:
        logits._accumulate(g * (np.exp(log_probs) - target) / rows)

    return record(np.array(-(target * log_probs).sum() / rows), (logits,), backward)
