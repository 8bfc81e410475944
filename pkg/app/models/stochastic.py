"""Stochastic-domain convolution.

Signed operands are split into sign and magnitude. Magnitudes are divided by
the layer scale, encoded as Sobol bit-streams, multiplied with AND and
decoded straight back to binary; signs and the squared scale are reapplied
and the products are summed conventionally.
"""

import math

import numpy as np

from app.models.tensor import conv_output_size, im2col, pad2d
from app.sc.bitstream import and_multiply, decode, encode, product_table
from app.sc.sobol import SobolGenerator
from app.schemas.config import ScConfig


def sc_conv_product(
    x_val: float, w_val: float, layer_scale: float, cfg: ScConfig, gen: SobolGenerator
) -> float:
    """One multiplication of the stochastic convolution, computed on real bit-streams"""
    assert layer_scale > 0, "layer_scale must be positive"
    assert abs(x_val) <= layer_scale and abs(w_val) <= layer_scale, (
        f"operands ({x_val}, {w_val}) exceed layer_scale {layer_scale}"
    )
    n = cfg.bitstream_len
    a = encode(abs(x_val) / layer_scale, cfg.activation_dim, n, gen)
    b = encode(abs(w_val) / layer_scale, cfg.weight_dim, n, gen)
    sign = math.copysign(1.0, x_val) * math.copysign(1.0, w_val)
    return sign * layer_scale * layer_scale * decode(and_multiply(a, b))


def layer_scale(patches: np.ndarray, weight_scale: float) -> float:
    """max |value| over the layer weights and one image's input patches"""
    return max(float(weight_scale), float(np.abs(patches).max(initial=0.0)))


def sc_conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int,
    padding: int,
    cfg: ScConfig,
    gen: SobolGenerator,
) -> np.ndarray:
    """Batched convolution whose every product equals ``sc_conv_product``"""
    batch, _, height, width = x.shape
    c_out, _, kh, kw = weight.shape
    out_h = conv_output_size(height, kh, stride, padding)
    out_w = conv_output_size(width, kw, stride, padding)

    table = product_table(gen, cfg.bitstream_len, cfg.activation_dim, cfg.weight_dim)
    cols = im2col(pad2d(x, padding), kh, kw, stride).astype(np.float64)
    w = weight.reshape(c_out, -1).astype(np.float64)
    w_abs = np.abs(w)
    w_sign = np.sign(w)
    weight_scale = float(w_abs.max(initial=0.0))

    out = np.zeros((batch, c_out, out_h * out_w), dtype=np.float64)
    for b in range(batch):
        scale = layer_scale(cols[b], weight_scale)
        if scale == 0.0:
            continue
        a_levels = table.activation_levels(np.abs(cols[b]) / scale)
        w_levels = table.weight_levels(w_abs / scale)
        counts = table.counts[a_levels[None, :, :], w_levels[:, None, :]]
        signed = counts * (w_sign[:, None, :] * np.sign(cols[b])[None, :, :])
        out[b] = signed.sum(axis=2) * (scale * scale / cfg.bitstream_len)

    out += bias.astype(np.float64)[None, :, None]
    return out.reshape(batch, c_out, out_h, out_w).astype(x.dtype)
