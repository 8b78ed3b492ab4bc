"""
Numeric kernels: 2-D convolution (im2col), pooling and softmax.

All kernels work on N x H x W x C tensors. Gradient kernels are deterministic:
accumulation order depends only on the kernel geometry, never on timing.
"""

import math
from typing import NamedTuple, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ctclassifier.errors import ShapeError
from ctclassifier.tensor.core import Tensor

PADDINGS = ("same", "valid")
POOL_KINDS = ("max", "average")


class ConvGeometry(NamedTuple):
    out_h: int
    out_w: int
    pad_top: int
    pad_bottom: int
    pad_left: int
    pad_right: int


class PoolResult(NamedTuple):
    output: Tensor
    argmax: Optional[np.ndarray]


def _axis_geometry(size: int, k: int, padding: str, stride: int) -> Tuple[int, int, int]:
    if padding == "same":
        out = math.ceil(size / stride)
        pad_total = max((out - 1) * stride + k - size, 0)
        before = pad_total // 2
        return out, before, pad_total - before
    if k > size:
        raise ShapeError(f"kernel extent {k} exceeds input extent {size} with valid padding")
    return (size - k) // stride + 1, 0, 0


def conv_geometry(h: int, w: int, kh: int, kw: int, padding: str = "same", stride: int = 1) -> ConvGeometry:
    """Output extents and zero padding for a convolution window."""
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got '{padding}'")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    out_h, top, bottom = _axis_geometry(h, kh, padding, stride)
    out_w, left, right = _axis_geometry(w, kw, padding, stride)
    return ConvGeometry(out_h, out_w, top, bottom, left, right)


def im2col(x: Tensor, kh: int, kw: int, stride: int, geom: ConvGeometry) -> np.ndarray:
    """Unfold every receptive field into a row: (N*out_h*out_w, kh*kw*C)."""
    n, _, _, c = x.shape
    xp = np.pad(x, ((0, 0), (geom.pad_top, geom.pad_bottom), (geom.pad_left, geom.pad_right), (0, 0)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    windows = windows[:, :(geom.out_h - 1) * stride + 1:stride, :(geom.out_w - 1) * stride + 1:stride]
    # (N, oh, ow, C, kh, kw) -> (N, oh, ow, kh, kw, C)
    windows = windows.transpose(0, 1, 2, 4, 5, 3)
    return windows.reshape(n * geom.out_h * geom.out_w, kh * kw * c)


def col2im(dcols: np.ndarray, input_shape: Tuple[int, ...], kh: int, kw: int,
           stride: int, geom: ConvGeometry) -> Tensor:
    """Fold row gradients back onto the (unpadded) input grid."""
    n, h, w, c = input_shape
    dcols = dcols.reshape(n, geom.out_h, geom.out_w, kh, kw, c)
    hp = h + geom.pad_top + geom.pad_bottom
    wp = w + geom.pad_left + geom.pad_right
    dxp = np.zeros((n, hp, wp, c), dtype=dcols.dtype)
    h_span = (geom.out_h - 1) * stride + 1
    w_span = (geom.out_w - 1) * stride + 1
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + h_span:stride, j:j + w_span:stride, :] += dcols[:, :, :, i, j, :]
    return dxp[:, geom.pad_top:geom.pad_top + h, geom.pad_left:geom.pad_left + w, :]


def _check_conv_operands(x: Tensor, kernels: Tensor, bias: Tensor):
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects N x H x W x C input, got {x.shape}")
    if kernels.ndim != 4:
        raise ShapeError(f"conv2d expects Kh x Kw x Cin x Cout kernels, got {kernels.shape}")
    if kernels.shape[2] != x.shape[3]:
        raise ShapeError(f"conv2d channel mismatch: input {x.shape} vs kernels {kernels.shape}")
    if bias.shape != (kernels.shape[3],):
        raise ShapeError(f"conv2d bias {bias.shape} does not match kernels {kernels.shape}")


def conv2d_with_cols(x: Tensor, kernels: Tensor, bias: Tensor, padding: str = "same",
                     stride: int = 1) -> Tuple[Tensor, np.ndarray]:
    """conv2d that also hands back the unfolded input for the backward pass."""
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    bias = np.asarray(bias)
    _check_conv_operands(x, kernels, bias)
    kh, kw, cin, cout = kernels.shape
    geom = conv_geometry(x.shape[1], x.shape[2], kh, kw, padding, stride)
    cols = im2col(x, kh, kw, stride, geom)
    out = cols @ kernels.reshape(kh * kw * cin, cout) + bias
    return out.reshape(x.shape[0], geom.out_h, geom.out_w, cout), cols


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, padding: str = "same", stride: int = 1) -> Tensor:
    """
    2-D cross-correlation (no kernel flip) plus per-output-channel bias.

    Args:
        x: N x H x W x Cin input
        kernels: Kh x Kw x Cin x Cout weights
        bias: Cout biases
        padding: 'same' (zero padded, output ceil(H/stride)) or 'valid'
        stride: Positive step of the window

    Returns:
        N x out_h x out_w x Cout tensor
    """
    return conv2d_with_cols(x, kernels, bias, padding, stride)[0]


def conv2d_backward(upstream: Tensor, cols: np.ndarray, kernels: Tensor, input_shape: Tuple[int, ...],
                    padding: str = "same", stride: int = 1) -> Tuple[Tensor, Tensor, Tensor]:
    """Gradients of conv2d w.r.t. input, kernels and bias."""
    kh, kw, cin, cout = kernels.shape
    geom = conv_geometry(input_shape[1], input_shape[2], kh, kw, padding, stride)
    expected = (input_shape[0], geom.out_h, geom.out_w, cout)
    if upstream.shape != expected:
        raise ShapeError(f"conv2d upstream gradient {upstream.shape} does not match output {expected}")
    dout = upstream.reshape(-1, cout)
    w_mat = kernels.reshape(kh * kw * cin, cout)
    d_bias = dout.sum(axis=0)
    d_kernels = (cols.T @ dout).reshape(kernels.shape)
    d_input = col2im(dout @ w_mat.T, input_shape, kh, kw, stride, geom)
    return d_input, d_kernels, d_bias


def pool_output_extent(size: int, window: int, stride: int) -> int:
    if window > size:
        raise ShapeError(f"pool window {window} exceeds input extent {size}")
    return (size - window) // stride + 1


def pool2d(x: Tensor, kind: str = "max", window: int = 2, stride: Optional[int] = None) -> PoolResult:
    """
    Max or average pooling over window x window patches.

    Max pooling also returns the flat in-window argmax of every output element.
    """
    if kind not in POOL_KINDS:
        raise ValueError(f"pool kind must be one of {POOL_KINDS}, got '{kind}'")
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise ValueError(f"pool window and stride must be positive, got {window}, {stride}")
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"pool2d expects N x H x W x C input, got {x.shape}")
    n, h, w, c = x.shape
    out_h = pool_output_extent(h, window, stride)
    out_w = pool_output_extent(w, window, stride)

    windows = sliding_window_view(x, (window, window), axis=(1, 2))
    windows = windows[:, :(out_h - 1) * stride + 1:stride, :(out_w - 1) * stride + 1:stride]
    flat = windows.reshape(n, out_h, out_w, c, window * window)

    if kind == "average":
        return PoolResult(flat.mean(axis=-1), None)
    argmax = flat.argmax(axis=-1)
    output = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return PoolResult(output, argmax)


def pool2d_backward(upstream: Tensor, input_shape: Tuple[int, ...], kind: str, window: int,
                    stride: Optional[int] = None, argmax: Optional[np.ndarray] = None) -> Tensor:
    """Route pooled gradients back to the input grid."""
    stride = window if stride is None else stride
    n, h, w, c = input_shape
    out_h = pool_output_extent(h, window, stride)
    out_w = pool_output_extent(w, window, stride)
    if upstream.shape != (n, out_h, out_w, c):
        raise ShapeError(f"pool2d upstream gradient {upstream.shape} does not match output {(n, out_h, out_w, c)}")
    if kind == "max" and argmax is None:
        raise ValueError("max pooling backward needs the forward argmax")

    dx = np.zeros(input_shape, dtype=upstream.dtype)
    h_span = (out_h - 1) * stride + 1
    w_span = (out_w - 1) * stride + 1
    scale = 1.0 / (window * window)
    for i in range(window):
        for j in range(window):
            if kind == "max":
                contribution = upstream * (argmax == i * window + j)
            else:
                contribution = upstream * scale
            dx[:, i:i + h_span:stride, j:j + w_span:stride, :] += contribution
    return dx


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax of an N x K tensor, max-subtracted for overflow safety."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ShapeError(f"softmax expects N x K logits, got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_backward(probs: Tensor, upstream: Tensor) -> Tensor:
    """Vector-Jacobian product of softmax."""
    if upstream.shape != probs.shape:
        raise ShapeError(f"softmax upstream gradient {upstream.shape} does not match output {probs.shape}")
    return probs * (upstream - (upstream * probs).sum(axis=1, keepdims=True))
