"""Dense-array primitives shared by the layers and the attack.

Tensors are C-contiguous numpy arrays; production code uses float32 and the
functions here keep whatever floating dtype they are given. Convolutions go
through an im2col view so forward and backward are plain matrix products.
"""

from typing import Tuple

import numpy as np

from app.utils.errors import ShapeError

DTYPE = np.float32


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - kernel
    if stride < 1 or padding < 0:
        raise ShapeError(f"Invalid stride={stride} / padding={padding}")
    if span < 0:
        raise ShapeError(f"Kernel of size {kernel} does not fit padded input of size {size + 2 * padding}")
    if span % stride:
        raise ShapeError(
            f"Output size ({size} + 2*{padding} - {kernel}) / {stride} + 1 is not integral"
        )
    return span // stride + 1


def pad2d(x: np.ndarray, padding: int) -> np.ndarray:
    """Zero-pad the two trailing axes of a (B, C, H, W) array"""
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, out_h * out_w, C * kh * kw), patch entries ordered (c, i, j)"""
    batch, channels = x.shape[:2]
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch, out_h * out_w, channels * kh * kw)
    return np.ascontiguousarray(cols)


def col2im(
    cols: np.ndarray, padded_shape: Tuple[int, ...], kh: int, kw: int, stride: int
) -> np.ndarray:
    """Adjoint of im2col: scatter-add patch gradients back into a padded input"""
    batch, channels, height, width = padded_shape
    out_h = (height - kh) // stride + 1
    out_w = (width - kw) // stride + 1
    patches = cols.reshape(batch, out_h, out_w, channels, kh, kw)
    image = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            image[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += (
                patches[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return image


def conv2d_with_cols(
    x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, stride: int, padding: int
) -> Tuple[np.ndarray, np.ndarray, Tuple[int, ...]]:
    """Batched convolution that also returns the im2col patches and padded shape backward needs"""
    batch, c_in, height, width = x.shape
    c_out, k_in, kh, kw = kernels.shape
    if k_in != c_in:
        raise ShapeError(f"Kernels expect {k_in} input channels, input has {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"Bias shape {bias.shape} does not match {c_out} kernels")
    out_h = conv_output_size(height, kh, stride, padding)
    out_w = conv_output_size(width, kw, stride, padding)

    padded = pad2d(x, padding)
    cols = im2col(padded, kh, kw, stride)
    flat = kernels.reshape(c_out, -1).astype(x.dtype, copy=False)
    out = cols @ flat.T + bias.astype(x.dtype, copy=False)
    return out.transpose(0, 2, 1).reshape(batch, c_out, out_h, out_w), cols, padded.shape


def conv2d(
    input: np.ndarray,
    kernels: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Cross-correlation with bias for a (C, H, W) image or a (B, C, H, W) batch"""
    if kernels.ndim != 4:
        raise ShapeError(f"Kernels must be (C_out, C_in, kH, kW), got shape {kernels.shape}")
    if input.ndim == 3:
        return conv2d_with_cols(input[None], kernels, bias, stride, padding)[0][0]
    if input.ndim == 4:
        return conv2d_with_cols(input, kernels, bias, stride, padding)[0]
    raise ShapeError(f"Convolution input must be (C, H, W) or (B, C, H, W), got {input.shape}")


def matmul_affine(input: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """w . x + b for a vector (n,) or a batch (B, n)"""
    if weights.ndim != 2 or input.shape[-1] != weights.shape[1]:
        raise ShapeError(f"Cannot apply weights {weights.shape} to input {input.shape}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"Bias shape {bias.shape} does not match {weights.shape[0]} outputs")
    if input.ndim not in (1, 2):
        raise ShapeError(f"Affine input must be (n,) or (B, n), got {input.shape}")
    return input @ weights.T + bias


def l2_distance(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"Shapes differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.sum(diff * diff)))
