"""Model container, LeNet-5 builder, forward inference and reverse-mode gradients."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.models.layers import (
    Conv2D,
    Dense,
    Flatten,
    Layer,
    LayerKind,
    MaxPool2x2,
    Params,
    ReLU,
    Shape,
    Softmax,
    log_softmax,
)
from app.models.tensor import DTYPE
from app.sc.sobol import MAX_DIMENSIONS, SobolGenerator, new_sobol
from app.schemas.config import InferenceMode, LossKind, ScConfig
from app.utils.errors import ShapeError, UsageError


@lru_cache(maxsize=1)
def default_generator() -> SobolGenerator:
    return new_sobol(MAX_DIMENSIONS)


class ModelSpec:
    """Ordered layers plus the input shape they accept; the last layer is Softmax"""

    def __init__(self, layers: Sequence[Layer], input_shape: Shape, num_classes: int):
        self.layers: Tuple[Layer, ...] = tuple(layers)
        self.input_shape = tuple(input_shape)
        self.num_classes = num_classes

        if not self.layers or self.layers[-1].kind != LayerKind.SOFTMAX:
            raise ShapeError("The final layer of a model must be Softmax")
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        if shapes[-1] != (num_classes,):
            raise ShapeError(f"Model emits shape {shapes[-1]}, expected ({num_classes},)")
        self.shapes: Tuple[Shape, ...] = tuple(shapes)

    def conv_indices(self) -> List[int]:
        """Layer indices of the Conv2D layers, in network order"""
        return [i for i, layer in enumerate(self.layers) if layer.kind == LayerKind.CONV2D]

    @property
    def sc_enabled(self) -> bool:
        return any(getattr(layer, "sc_config", None) is not None for layer in self.layers)

    def with_sc(self, configs: Mapping[int, Optional[ScConfig]]) -> "ModelSpec":
        """Copy with ScConfigs attached by 1-based conv ordinal; other convs run in float"""
        convs = self.conv_indices()
        for ordinal in configs:
            if not 1 <= ordinal <= len(convs):
                raise UsageError(f"Model has {len(convs)} conv layers, no conv #{ordinal}")
        layers = list(self.layers)
        for ordinal, index in enumerate(convs, start=1):
            layers[index] = layers[index].with_sc(configs.get(ordinal))
        return ModelSpec(layers, self.input_shape, self.num_classes)

    def params(self) -> List[Params]:
        return [layer.params() for layer in self.layers]

    def with_params(self, params: Sequence[Params]) -> "ModelSpec":
        if len(params) != len(self.layers):
            raise UsageError(f"Expected parameters for {len(self.layers)} layers, got {len(params)}")
        layers = [layer.with_params(**p) for layer, p in zip(self.layers, params)]
        return ModelSpec(layers, self.input_shape, self.num_classes)

    def parameter_count(self) -> int:
        return sum(layer.parameter_count() for layer in self.layers)

    def describe(self) -> List[Dict]:
        return [
            {
                "index": i,
                "kind": layer.kind.value,
                "output_shape": self.shapes[i + 1],
                "parameters": layer.parameter_count(),
                "sc": getattr(layer, "sc_config", None),
            }
            for i, layer in enumerate(self.layers)
        ]

    def __repr__(self) -> str:
        return f"<ModelSpec(layers={len(self.layers)}, input_shape={self.input_shape}, parameters={self.parameter_count()})>"


def _kaiming_uniform(rng: np.random.Generator, shape: Shape, fan_in: int) -> Tuple[np.ndarray, np.ndarray]:
    bound = np.sqrt(6.0 / fan_in)
    weight = rng.uniform(-bound, bound, size=shape).astype(DTYPE)
    bias_bound = 1.0 / np.sqrt(fan_in)
    bias = rng.uniform(-bias_bound, bias_bound, size=shape[0]).astype(DTYPE)
    return weight, bias


def conv_layer(rng: np.random.Generator, c_out: int, c_in: int, k: int, stride: int = 1, padding: int = 0) -> Conv2D:
    weight, bias = _kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k)
    return Conv2D(weight, bias, stride=stride, padding=padding)


def dense_layer(rng: np.random.Generator, n_out: int, n_in: int) -> Dense:
    weight, bias = _kaiming_uniform(rng, (n_out, n_in), n_in)
    return Dense(weight, bias)


def build_lenet5(num_classes: int = 10, rng: Optional[np.random.Generator] = None) -> ModelSpec:
    """LeNet-5 for 1x28x28 inputs, Kaiming-uniform initialized"""
    if rng is None:
        rng = np.random.default_rng(0)
    layers = [
        conv_layer(rng, 6, 1, 5, padding=2),
        ReLU(),
        MaxPool2x2(),
        conv_layer(rng, 16, 6, 5),
        ReLU(),
        MaxPool2x2(),
        Flatten(),
        dense_layer(rng, 120, 16 * 5 * 5),
        ReLU(),
        dense_layer(rng, 84, 120),
        ReLU(),
        dense_layer(rng, num_classes, 84),
        Softmax(),
    ]
    model = ModelSpec(layers, (1, 28, 28), num_classes)
    logger.debug(f"Built LeNet-5 with {model.parameter_count()} parameters")
    return model


def _as_batch(model: ModelSpec, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.shape == model.input_shape:
        return x[None], True
    if x.ndim == len(model.input_shape) + 1 and x.shape[1:] == model.input_shape:
        return x, False
    raise ShapeError(f"Input shape {x.shape} does not match model input {model.input_shape}")


def forward(
    model: ModelSpec,
    x: np.ndarray,
    mode: InferenceMode = InferenceMode.FLOAT,
    gen: Optional[SobolGenerator] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(probabilities, logits) for one image or a batch.

    In SC mode every Conv2D carrying an ScConfig multiplies in the stochastic
    domain; all other layers run the ordinary float path.
    """
    batch, single = _as_batch(model, x)
    if mode == InferenceMode.SC:
        if not model.sc_enabled:
            raise UsageError("SC inference requested but no conv layer carries an ScConfig")
        gen = gen or default_generator()

    h = batch
    for layer in model.layers[:-1]:
        if mode == InferenceMode.SC and getattr(layer, "sc_config", None) is not None:
            h = layer.forward_sc(h, gen)
        else:
            h, _ = layer.forward(h)
    logits = h
    probs, _ = model.layers[-1].forward(logits)
    if single:
        return probs[0], logits[0]
    return probs, logits


def predict(
    model: ModelSpec,
    images: np.ndarray,
    mode: InferenceMode = InferenceMode.FLOAT,
    batch_size: int = 256,
    gen: Optional[SobolGenerator] = None,
) -> np.ndarray:
    """argmax class for every image of a (B, C, H, W) array"""
    predictions = []
    for start in range(0, len(images), batch_size):
        _, logits = forward(model, images[start : start + batch_size], mode, gen)
        predictions.append(logits.argmax(axis=1))
    if not predictions:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(predictions)


@dataclass
class Gradients:
    params: List[Params]
    input: np.ndarray
    logits: np.ndarray
    logits_grad: np.ndarray
    losses: np.ndarray

    @property
    def loss(self) -> float:
        return float(self.losses.mean())


def cw_margin(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """max_{i != t} Z_i - Z_t per row"""
    rows = np.arange(len(targets))
    others = logits.copy()
    others[rows, targets] = -np.inf
    return others.max(axis=1) - logits[rows, targets]


def _loss_and_grad(
    logits: np.ndarray, labels: np.ndarray, loss: LossKind, kappa: float
) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.arange(len(labels))
    if loss == LossKind.CROSS_ENTROPY:
        log_probs = log_softmax(logits)
        losses = -log_probs[rows, labels]
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1
        # mean over the batch
        return losses, grad / len(labels)
    if loss == LossKind.CW_OBJECTIVE:
        others = logits.copy()
        others[rows, labels] = -np.inf
        runner_up = others.argmax(axis=1)
        margin = logits[rows, runner_up] - logits[rows, labels]
        losses = np.maximum(margin, -kappa)
        active = (margin > -kappa).astype(logits.dtype)
        grad = np.zeros_like(logits)
        grad[rows, runner_up] = active
        grad[rows, labels] -= active
        # summed over the batch so each image keeps its own gradient
        return losses, grad
    raise UsageError(f"Unsupported loss {loss}")


def backward(
    model: ModelSpec,
    x: np.ndarray,
    label_or_target: Union[int, np.ndarray],
    loss: LossKind = LossKind.CROSS_ENTROPY,
    kappa: float = 0.0,
    need_param_grads: bool = True,
) -> Gradients:
    """Exact float-path gradients of the chosen loss w.r.t. every parameter and the input.

    Cross-entropy is averaged over the batch; the C&W objective
    max(max_{i != t} Z_i - Z_t, -kappa) is summed. ScConfigs are ignored.
    """
    batch, single = _as_batch(model, x)
    labels = np.atleast_1d(np.asarray(label_or_target, dtype=np.int64))
    if labels.shape != (batch.shape[0],):
        raise ShapeError(f"Got {labels.shape[0]} labels for a batch of {batch.shape[0]}")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise UsageError(f"Class index out of range [0, {model.num_classes})")

    caches = []
    h = batch
    for layer in model.layers[:-1]:
        h, cache = layer.forward(h)
        caches.append(cache)
    logits = h

    losses, grad = _loss_and_grad(logits, labels, loss, kappa)
    logits_grad = grad.copy()

    param_grads: List[Params] = [{} for _ in model.layers]
    for index in range(len(model.layers) - 2, -1, -1):
        layer = model.layers[index]
        try:
            grad, grads = layer.backward(grad, caches[index], need_param_grads=need_param_grads)
        except NotImplementedError:
            raise UsageError(f"No backward pass for layer kind {layer.kind}")
        param_grads[index] = grads

    input_grad = grad[0] if single else grad
    return Gradients(
        params=param_grads,
        input=input_grad,
        logits=logits[0] if single else logits,
        logits_grad=logits_grad[0] if single else logits_grad,
        losses=losses,
    )
