"""Differentiable 1-D kernels: convolutions, batch norm, activations, loss.

Every op takes value tensors, computes the forward result, and (when given a
``Tape``) records a closure computing exact input/parameter gradients. The
convolution family shares three core kernels, because a transposed
convolution is algebraically the input-gradient of a forward convolution
with the same stride and padding:

    forward correlation        y[b,o,l] = sum_{i,j} xpad[b,i,s*l+j] w[o,i,j]
    input gradient             scatter of the same stencil
    weight gradient            correlation of input windows with dy

Weight layouts: (out_ch, in_ch, kernel) for ``conv1d`` and
(in_ch, out_ch, kernel) for ``conv_transpose1d``, so a shared buffer makes
the two operators exact adjoints of each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ValidationError
from .tensor import Parameter, SignalTensor, Tape


@dataclass(frozen=True)
class ConvSpec:
    """Shape contract for one convolution layer."""

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    transposed: bool = False

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.kernel, self.stride) < 1:
            raise ValidationError(f"conv spec requires positive dims: {self}")
        if self.padding < 0:
            raise ValidationError(f"padding must be >= 0: {self}")

    def out_length(self, in_length: int) -> int:
        if self.transposed:
            return (in_length - 1) * self.stride + self.kernel - 2 * self.padding
        return (in_length + 2 * self.padding - self.kernel) // self.stride + 1


# ---------------------------------------------------------------------------
# Core correlation kernels (no autograd; shared by conv and transposed conv).
# ---------------------------------------------------------------------------

def _windows(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Strided sliding windows of the padded input: (b, c, n_out, kernel)."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    return sliding_window_view(x, kernel, axis=2)[:, :, ::stride, :]


def _corr_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int) -> np.ndarray:
    b = x.shape[0]
    out_ch, in_ch, kernel = w.shape
    win = _windows(x, kernel, stride, padding)
    n_out = win.shape[2]
    cols = win.transpose(0, 2, 1, 3).reshape(b, n_out, in_ch * kernel)
    y = cols @ w.reshape(out_ch, in_ch * kernel).T
    return y.transpose(0, 2, 1)


def _corr_input_grad(dy: np.ndarray, w: np.ndarray, stride: int, padding: int,
                     input_len: int) -> np.ndarray:
    b, _, n_out = dy.shape
    out_ch, in_ch, kernel = w.shape
    dcols = dy.transpose(0, 2, 1) @ w.reshape(out_ch, in_ch * kernel)
    dcols = dcols.reshape(b, n_out, in_ch, kernel).transpose(0, 2, 1, 3)
    dxp = np.zeros((b, in_ch, input_len + 2 * padding), dtype=dy.dtype)
    for j in range(kernel):
        dxp[:, :, j:j + stride * n_out:stride] += dcols[:, :, :, j]
    if padding:
        return dxp[:, :, padding:padding + input_len]
    return dxp


def _corr_weight_grad(dy: np.ndarray, x: np.ndarray, stride: int, padding: int,
                      kernel: int) -> np.ndarray:
    win = _windows(x, kernel, stride, padding)
    # dw[o,i,j] = sum_{b,l} dy[b,o,l] * win[b,i,l,j]
    return np.tensordot(dy, win, axes=([0, 2], [0, 2]))


# ---------------------------------------------------------------------------
# Differentiable ops.
# ---------------------------------------------------------------------------

def conv1d(x: SignalTensor, weight: Parameter, bias: Parameter, spec: ConvSpec,
           tape: Tape | None = None) -> SignalTensor:
    """Cross-correlation with zero padding; weight shape (out, in, kernel)."""
    if spec.transposed:
        raise ValidationError("conv1d requires a non-transposed spec")
    if x.channels != spec.in_channels:
        raise ValidationError(
            f"channel mismatch: input has {x.channels}, spec expects {spec.in_channels}")
    if weight.shape != (spec.out_channels, spec.in_channels, spec.kernel):
        raise ValidationError(f"weight shape {weight.shape} does not match {spec}")
    in_len = x.length
    if spec.out_length(in_len) < 1:
        raise ValidationError(
            f"output length < 1 for input length {in_len} with {spec}")

    y_values = _corr_forward(x.values, weight.values, spec.stride, spec.padding)
    y_values += bias.values[None, :, None]
    y = SignalTensor(y_values)

    if tape is not None:
        def backward():
            dy = y.grad
            x.grad += _corr_input_grad(dy, weight.values, spec.stride, spec.padding, in_len)
            weight.grad += _corr_weight_grad(dy, x.values, spec.stride, spec.padding, spec.kernel)
            bias.grad += dy.sum(axis=(0, 2))
        tape.record(backward)
    return y


def conv_transpose1d(x: SignalTensor, weight: Parameter, bias: Parameter, spec: ConvSpec,
                     tape: Tape | None = None) -> SignalTensor:
    """Strided transposed convolution; weight shape (in, out, kernel)."""
    if not spec.transposed:
        raise ValidationError("conv_transpose1d requires a transposed spec")
    if x.channels != spec.in_channels:
        raise ValidationError(
            f"channel mismatch: input has {x.channels}, spec expects {spec.in_channels}")
    if weight.shape != (spec.in_channels, spec.out_channels, spec.kernel):
        raise ValidationError(f"weight shape {weight.shape} does not match {spec}")
    in_len = x.length
    out_len = spec.out_length(in_len)
    if out_len < 1:
        raise ValidationError(
            f"output length < 1 for input length {in_len} with {spec}")

    y_values = _corr_input_grad(x.values, weight.values, spec.stride, spec.padding, out_len)
    y_values += bias.values[None, :, None]
    y = SignalTensor(y_values)

    if tape is not None:
        def backward():
            dy = y.grad
            x.grad += _corr_forward(dy, weight.values, spec.stride, spec.padding)
            weight.grad += _corr_weight_grad(x.values, dy, spec.stride, spec.padding, spec.kernel)
            bias.grad += dy.sum(axis=(0, 2))
        tape.record(backward)
    return y


class BatchNormState:
    """Per-channel affine parameters plus running statistics."""

    def __init__(self, gamma: Parameter, beta: Parameter, momentum: float = 0.1,
                 eps: float = 1e-5):
        if not 0 < momentum <= 1:
            raise ValidationError(f"momentum must be in (0, 1], got {momentum}")
        if eps <= 0:
            raise ValidationError(f"eps must be > 0, got {eps}")
        self.gamma = gamma
        self.beta = beta
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros_like(gamma.values)
        self.running_var = np.ones_like(gamma.values)

    @property
    def channels(self) -> int:
        return self.gamma.values.shape[0]


def batchnorm1d(x: SignalTensor, state: BatchNormState, training: bool,
                tape: Tape | None = None) -> SignalTensor:
    """Normalize per channel over (batch, length), then scale and shift.

    Training mode uses batch statistics and updates the running estimate;
    inference mode uses the running statistics.
    """
    if x.channels != state.channels:
        raise ValidationError(
            f"channel mismatch: input has {x.channels}, state has {state.channels}")
    gamma = state.gamma
    beta = state.beta

    if training:
        m = x.batch * x.length
        if m < 2:
            raise ValidationError("training-mode batch norm needs batch*length >= 2")
        mean = x.values.mean(axis=(0, 2))
        var = x.values.var(axis=(0, 2))
        inv_std = 1.0 / np.sqrt(var + state.eps)
        xhat = (x.values - mean[None, :, None]) * inv_std[None, :, None]
        mom = state.momentum
        state.running_mean = (1 - mom) * state.running_mean + mom * mean
        state.running_var = (1 - mom) * state.running_var + mom * var * (m / (m - 1))
    else:
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (x.values - state.running_mean[None, :, None]) * inv_std[None, :, None]

    y = SignalTensor(gamma.values[None, :, None] * xhat + beta.values[None, :, None])

    if tape is not None:
        def backward():
            dy = y.grad
            gamma.grad += (dy * xhat).sum(axis=(0, 2))
            beta.grad += dy.sum(axis=(0, 2))
            dxhat = dy * gamma.values[None, :, None]
            if training:
                n = x.batch * x.length
                sum_dxhat = dxhat.sum(axis=(0, 2), keepdims=True)
                sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
                x.grad += (inv_std[None, :, None] / n) * (
                    n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
            else:
                x.grad += dxhat * inv_std[None, :, None]
        tape.record(backward)
    return y


def leaky_relu(x: SignalTensor, slope: float, tape: Tape | None = None) -> SignalTensor:
    """y = x for x > 0, slope*x otherwise; the subgradient at 0 is slope."""
    if slope < 0:
        raise ValidationError(f"slope must be >= 0, got {slope}")
    factor = np.where(x.values > 0, x.values.dtype.type(1), x.values.dtype.type(slope))
    y = SignalTensor(x.values * factor)

    if tape is not None:
        def backward():
            x.grad += y.grad * factor
        tape.record(backward)
    return y


def concat_channels(a: SignalTensor, b: SignalTensor, tape: Tape | None = None) -> SignalTensor:
    """Stack two tensors along the channel axis."""
    if a.batch != b.batch or a.length != b.length:
        raise ValidationError(
            f"concat requires equal batch and length: {a.shape} vs {b.shape}")
    split = a.channels
    y = SignalTensor(np.concatenate([a.values, b.values], axis=1))

    if tape is not None:
        def backward():
            a.grad += y.grad[:, :split, :]
            b.grad += y.grad[:, split:, :]
        tape.record(backward)
    return y


def add(a: SignalTensor, b: SignalTensor, tape: Tape | None = None) -> SignalTensor:
    """Elementwise sum of two same-shape tensors (residual connections)."""
    if a.shape != b.shape:
        raise ValidationError(f"add requires equal shapes: {a.shape} vs {b.shape}")
    y = SignalTensor(a.values + b.values)

    if tape is not None:
        def backward():
            a.grad += y.grad
            b.grad += y.grad
        tape.record(backward)
    return y


def crop_or_pad(x: SignalTensor, target_len: int, tape: Tape | None = None) -> SignalTensor:
    """Center-crop or right-zero-pad along the length axis to target_len."""
    length = x.length
    if length == target_len:
        return x
    if length > target_len:
        start = (length - target_len) // 2
        y = SignalTensor(x.values[:, :, start:start + target_len].copy())
        if tape is not None:
            def backward():
                x.grad[:, :, start:start + target_len] += y.grad
            tape.record(backward)
        return y
    pad = target_len - length
    y = SignalTensor(np.pad(x.values, ((0, 0), (0, 0), (0, pad))))
    if tape is not None:
        def backward():
            x.grad += y.grad[:, :, :length]
        tape.record(backward)
    return y


def resize_linear(x: SignalTensor, target_len: int, tape: Tape | None = None) -> SignalTensor:
    """Endpoint-aligned linear-interpolation resize along the length axis."""
    length = x.length
    if length == target_len:
        return x
    if target_len < 1:
        raise ValidationError(f"target length must be >= 1, got {target_len}")
    if target_len == 1:
        pos = np.zeros(1)
    else:
        pos = np.arange(target_len) * ((length - 1) / (target_len - 1))
    lo = np.floor(pos).astype(np.intp)
    lo = np.minimum(lo, length - 2) if length > 1 else np.zeros(target_len, dtype=np.intp)
    hi = np.minimum(lo + 1, length - 1)
    frac = (pos - lo).astype(x.dtype)
    y = SignalTensor(x.values[:, :, lo] * (1 - frac) + x.values[:, :, hi] * frac)

    if tape is not None:
        def backward():
            b, c, _ = x.shape
            dxf = x.grad.reshape(b * c, length)
            dyf = y.grad.reshape(b * c, target_len)
            rows = np.arange(b * c)[:, None]
            np.add.at(dxf, (rows, lo[None, :]), dyf * (1 - frac))
            np.add.at(dxf, (rows, hi[None, :]), dyf * frac)
        tape.record(backward)
    return y


class LossValue:
    """Scalar loss; its gradient flows once the owning tape runs backward."""

    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = value

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"LossValue({self.value})"


def smooth_l1_loss(pred: SignalTensor, target, reduction: str = "mean",
                   tape: Tape | None = None) -> LossValue:
    """Huber-style loss: quadratic below unit error, linear above.

    Per element of d = pred - target: 0.5*d^2 where |d| < 1, |d| - 0.5
    otherwise. The gradient w.r.t. pred is d where |d| < 1 and sign(d)
    otherwise, scaled by 1/n for mean reduction.
    """
    if reduction not in ("mean", "sum"):
        raise ValidationError(f"unknown reduction {reduction!r}")
    target_values = target.values if isinstance(target, SignalTensor) else np.asarray(target)
    if pred.shape != target_values.shape:
        raise ValidationError(
            f"shape mismatch: pred {pred.shape} vs target {target_values.shape}")

    d = pred.values - target_values
    abs_d = np.abs(d)
    quad = abs_d < 1.0
    elementwise = np.where(quad, 0.5 * d * d, abs_d - 0.5)
    total = float(elementwise.sum())
    n = d.size
    value = total / n if reduction == "mean" else total

    if tape is not None:
        def backward():
            g = np.where(quad, d, np.sign(d))
            if reduction == "mean":
                g = g / n
            pred.grad += g.astype(pred.dtype, copy=False)
        tape.record(backward)
    return LossValue(value)
