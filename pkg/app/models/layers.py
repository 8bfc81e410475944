"""Network layers.

Layers are immutable: ``forward`` returns ``(output, cache)`` and
``backward`` consumes that cache, so one layer object can serve any number
of concurrent forward/backward passes. Every layer works on batches whose
leading axis is the batch axis.
"""

from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from app.models.stochastic import sc_conv2d
from app.models.tensor import col2im, conv2d_with_cols, conv_output_size, matmul_affine
from app.sc.sobol import SobolGenerator
from app.schemas.config import ScConfig
from app.utils.errors import ShapeError, UsageError

Shape = Tuple[int, ...]
Params = Dict[str, np.ndarray]


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    MAXPOOL2X2 = "maxpool2x2"
    DENSE = "dense"
    RELU = "relu"
    SOFTMAX = "softmax"
    FLATTEN = "flatten"


class Layer:
    kind: LayerKind
    param_names: Tuple[str, ...] = ()

    def params(self) -> Params:
        return {name: getattr(self, name) for name in self.param_names}

    def with_params(self, **params: np.ndarray) -> "Layer":
        return self

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params().values()))

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True) -> Tuple[np.ndarray, Params]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__}>"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class Conv2D(Layer):
    kind = LayerKind.CONV2D
    param_names = ("weight", "bias")

    def __init__(
        self,
        weight: np.ndarray,
        bias: np.ndarray,
        stride: int = 1,
        padding: int = 0,
        sc_config: Optional[ScConfig] = None,
    ):
        if weight.ndim != 4 or bias.shape != (weight.shape[0],):
            raise ShapeError(f"Conv2D weight {weight.shape} / bias {bias.shape} mismatch")
        self.weight = _frozen(weight)
        self.bias = _frozen(bias)
        self.stride = stride
        self.padding = padding
        self.sc_config = sc_config

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def with_params(self, **params: np.ndarray) -> "Conv2D":
        return Conv2D(
            params.get("weight", self.weight),
            params.get("bias", self.bias),
            self.stride,
            self.padding,
            self.sc_config,
        )

    def with_sc(self, sc_config: Optional[ScConfig]) -> "Conv2D":
        layer = Conv2D.__new__(Conv2D)
        layer.__dict__.update(self.__dict__)
        layer.sc_config = sc_config
        return layer

    def output_shape(self, input_shape: Shape) -> Shape:
        c_in, height, width = input_shape
        c_out, k_in, kh, kw = self.weight.shape
        if c_in != k_in:
            raise ShapeError(f"Conv2D expects {k_in} input channels, got {c_in}")
        return (
            c_out,
            conv_output_size(height, kh, self.stride, self.padding),
            conv_output_size(width, kw, self.stride, self.padding),
        )

    def forward(self, x: np.ndarray):
        out, cols, padded_shape = conv2d_with_cols(x, self.weight, self.bias, self.stride, self.padding)
        return out, (cols, padded_shape)

    def forward_sc(self, x: np.ndarray, gen: SobolGenerator) -> np.ndarray:
        if self.sc_config is None:
            raise UsageError("Conv2D layer has no stochastic-computing configuration")
        self.output_shape(x.shape[1:])
        return sc_conv2d(x, self.weight, self.bias, self.stride, self.padding, self.sc_config, gen)

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        cols, padded_shape = cache
        batch, c_out = grad_out.shape[:2]
        _, _, kh, kw = self.weight.shape
        grad = grad_out.reshape(batch, c_out, -1).transpose(0, 2, 1)

        grads: Params = {}
        if need_param_grads:
            grads["weight"] = np.tensordot(grad, cols, axes=([0, 1], [0, 1])).reshape(self.weight.shape)
            grads["bias"] = grad.sum(axis=(0, 1))

        grad_cols = grad @ self.weight.reshape(c_out, -1).astype(grad.dtype)
        grad_padded = col2im(grad_cols, padded_shape, kh, kw, self.stride)
        p = self.padding
        grad_in = grad_padded[:, :, p : padded_shape[2] - p, p : padded_shape[3] - p] if p else grad_padded
        return np.ascontiguousarray(grad_in), grads

    def __repr__(self) -> str:
        sc = f", sc_config={self.sc_config}" if self.sc_config else ""
        return f"<Conv2D(weight={self.weight.shape}, stride={self.stride}, padding={self.padding}{sc})>"


class MaxPool2x2(Layer):
    kind = LayerKind.MAXPOOL2X2

    def output_shape(self, input_shape: Shape) -> Shape:
        channels, height, width = input_shape
        if height % 2 or width % 2:
            raise ShapeError(f"MaxPool2x2 needs even spatial dims, got {height}x{width}")
        return channels, height // 2, width // 2

    def forward(self, x: np.ndarray):
        batch, channels, height, width = x.shape
        self.output_shape(x.shape[1:])
        blocks = x.reshape(batch, channels, height // 2, 2, width // 2, 2)
        blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, height // 2, width // 2, 4)
        argmax = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
        return out, (argmax, x.shape)

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        argmax, input_shape = cache
        batch, channels, height, width = input_shape
        blocks = np.zeros(grad_out.shape + (4,), dtype=grad_out.dtype)
        np.put_along_axis(blocks, argmax[..., None], grad_out[..., None], axis=-1)
        grad_in = blocks.reshape(batch, channels, height // 2, width // 2, 2, 2)
        grad_in = grad_in.transpose(0, 1, 2, 4, 3, 5).reshape(input_shape)
        return grad_in, {}


class Dense(Layer):
    kind = LayerKind.DENSE
    param_names = ("weight", "bias")

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeError(f"Dense weight {weight.shape} / bias {bias.shape} mismatch")
        self.weight = _frozen(weight)
        self.bias = _frozen(bias)

    def with_params(self, **params: np.ndarray) -> "Dense":
        return Dense(params.get("weight", self.weight), params.get("bias", self.bias))

    def output_shape(self, input_shape: Shape) -> Shape:
        if input_shape != (self.weight.shape[1],):
            raise ShapeError(f"Dense expects input ({self.weight.shape[1]},), got {input_shape}")
        return (self.weight.shape[0],)

    def forward(self, x: np.ndarray):
        out = matmul_affine(x, self.weight.astype(x.dtype, copy=False), self.bias.astype(x.dtype, copy=False))
        return out, x

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        x = cache
        grads: Params = {}
        if need_param_grads:
            grads["weight"] = grad_out.T @ x
            grads["bias"] = grad_out.sum(axis=0)
        return grad_out @ self.weight.astype(grad_out.dtype), grads

    def __repr__(self) -> str:
        return f"<Dense(weight={self.weight.shape})>"


class ReLU(Layer):
    kind = LayerKind.RELU

    def forward(self, x: np.ndarray):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        return grad_out * cache, {}


class Flatten(Layer):
    kind = LayerKind.FLATTEN

    def output_shape(self, input_shape: Shape) -> Shape:
        return (int(np.prod(input_shape)),)

    def forward(self, x: np.ndarray):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        return grad_out.reshape(cache), {}


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class Softmax(Layer):
    kind = LayerKind.SOFTMAX

    def forward(self, x: np.ndarray):
        probs = np.exp(log_softmax(x))
        return probs, probs

    def backward(self, grad_out: np.ndarray, cache, need_param_grads: bool = True):
        probs = cache
        dot = (grad_out * probs).sum(axis=-1, keepdims=True)
        return probs * (grad_out - dot), {}
