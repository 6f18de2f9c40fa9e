"""Layer stacks, the named architectures and whole-model passes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import ConfigurationError, DimensionError, StateError
from ..numerics import DEFAULT_SEED, make_rng
from .layers import Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, ReLU, Softmax

ARCHITECTURES = ("vgg16_headless", "tiny_cnn", "tiny_cnn_7", "classifier_head_2", "classifier_head_7")
IMAGE_SHAPE = (50, 50, 3)
FEATURE_SHAPE = (1, 1, 512)


class Model:
    """An ordered, shape-checked layer stack."""

    def __init__(self, name: str, layers: list[Layer], input_shape: tuple[int, ...],
                 pooling_rounding: str | None = None):
        self.name = name
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.pooling_rounding = pooling_rounding
        self.version = 0  # bumped whenever parameters change; stale caches are rejected
        shapes = [self.input_shape]
        for layer in layers:
            shapes.append(layer.output_shape(shapes[-1]))
        self.shapes = shapes

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes[-1]

    @property
    def n_outputs(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def ends_with_softmax(self) -> bool:
        return bool(self.layers) and isinstance(self.layers[-1], Softmax)

    def init_params(self, seed: int | None = DEFAULT_SEED) -> "Model":
        rng = make_rng(seed)
        for layer, shape in zip(self.layers, self.shapes):
            layer.init_params(shape, rng)
        self.version += 1
        return self

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        for layer in self.layers:
            for key, value in layer.params.items():
                yield f"{layer.name}/{key}", value

    def n_params(self) -> int:
        return sum(v.size for _, v in self.named_params())

    def layer(self, name: str) -> Layer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def predict_proba(self, X, batch_size: int = 64, dtype=np.float64) -> np.ndarray:
        """Infer-mode outputs for a batch, flattened to (N, outputs)."""
        X = np.asarray(X)
        if X.shape[1:] != self.input_shape:
            X = X.reshape((X.shape[0],) + self.input_shape)
        outs = [forward(self, X[i:i + batch_size], dtype=dtype)[0].reshape(-1, self.n_outputs)
                for i in range(0, X.shape[0], batch_size)]
        if not outs:
            return np.zeros((0, self.n_outputs))
        return np.concatenate(outs).astype(np.float64)

    def summary(self) -> str:
        rows = [f"{self.name}: input {self.input_shape}"]
        for layer, shape in zip(self.layers, self.shapes[1:]):
            rows.append(f"  {layer.name:<16} {layer.kind:<10} -> {shape}")
        return "\n".join(rows)

    def __repr__(self):
        return f"Model({self.name!r}, {len(self.layers)} layers, {self.n_params()} params)"


@dataclass
class ForwardCache:
    version: int
    entries: list


def _conv_relu(name, filters):
    return [Conv2D(name, filters), ReLU(f"{name}_relu")]


def _vgg16_layers():
    layers: list[Layer] = []
    blocks = [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)]
    for b, (filters, depth) in enumerate(blocks, start=1):
        for k in range(1, depth + 1):
            layers += _conv_relu(f"Block{b}Conv{k}", filters)
        layers.append(MaxPool2D(f"Block{b}Pool", "floor"))
    return layers


def _tiny_cnn_layers(n_classes, dropout):
    return [
        *_conv_relu("Block1Conv1", 64),
        *_conv_relu("Block1Conv2", 64),
        MaxPool2D("BlockPool", "ceil"),
        *_conv_relu("Block2Conv1", 64),
        MaxPool2D("Block2Pool", "ceil"),
        Dropout("Dropout1", dropout),
        Flatten("Flatten1"),
        Dense("Dense1", 128),
        ReLU("Dense1_relu"),
        Dropout("Dropout2", dropout),
        Dense("Dense2", n_classes),
        Softmax("Softmax"),
    ]


def _head_layers(n_classes, dropout):
    return [
        Flatten("Flatten1"),
        Dense("Dense1", 256),
        ReLU("Dense1_relu"),
        Dropout("Dropout1", dropout),
        Dense("Dense2", n_classes),
        Softmax("Softmax"),
    ]


def build_architecture(name: str, seed: int | None = DEFAULT_SEED, dropout: float = 0.5,
                       init: bool = True) -> Model:
    """Construct one of the named architectures with seeded Kaiming-uniform weights.

    ``vgg16_headless`` pools with floor rounding (50 -> 25 -> 12 -> 6 -> 3 -> 1,
    512x1x1 out); ``tiny_cnn`` pools with ceil rounding (50 -> 25 -> 13, so the
    flatten width is 13 * 13 * 64 = 10816). ``tiny_cnn_7`` is ``tiny_cnn`` with
    a seven-way output.
    """
    if name == "vgg16_headless":
        model = Model(name, _vgg16_layers(), IMAGE_SHAPE, "floor")
    elif name in ("tiny_cnn", "tiny_cnn_7"):
        model = Model(name, _tiny_cnn_layers(2 if name == "tiny_cnn" else 7, dropout), IMAGE_SHAPE, "ceil")
    elif name in ("classifier_head_2", "classifier_head_7"):
        model = Model(name, _head_layers(int(name[-1]), dropout), FEATURE_SHAPE)
    else:
        raise ConfigurationError(f"unknown architecture {name!r}; expected one of {ARCHITECTURES}")
    if init:
        model.init_params(seed)
    return model


def forward(model: Model, x, train: bool = False, rng=None, dtype=np.float64):
    """Run ``x`` (N, *input_shape) through ``model``.

    Returns ``(output, cache)``; ``cache`` is ``None`` in infer mode. Dropout
    is active only when ``train`` is set, and then needs ``rng``.
    """
    x = np.asarray(x, dtype=dtype)
    if x.shape[1:] != model.input_shape:
        raise DimensionError(f"{model.name}: input batch {x.shape} does not match {model.input_shape}")
    entries = [] if train else None
    for layer in model.layers:
        x, cache = layer.forward(x, train=train, rng=rng)
        if train:
            entries.append(cache)
    return x, (ForwardCache(model.version, entries) if train else None)


def backward(model: Model, loss_grad, cache: ForwardCache | None, skip_softmax: bool = False):
    """Backpropagate ``loss_grad`` through the cached forward pass.

    With ``skip_softmax`` the gradient is taken to be with respect to the
    logits feeding the final softmax. Returns ``(input_grad, grads)`` where
    ``grads`` maps each parameter name to an array of that parameter's shape.
    """
    if cache is None or len(cache.entries) != len(model.layers):
        raise StateError("no training-mode forward cache for this model")
    if cache.version != model.version:
        raise StateError("forward cache is stale: parameters changed since the forward pass")
    layers = list(zip(model.layers, cache.entries))
    if skip_softmax:
        if not model.ends_with_softmax:
            raise StateError("skip_softmax requested on a model without a final softmax")
        layers = layers[:-1]
    grad = np.asarray(loss_grad, dtype=np.float64)
    grads: dict[str, np.ndarray] = {}
    for layer, entry in reversed(layers):
        grad, pgrads = layer.backward(grad, entry)
        for key, value in pgrads.items():
            grads[f"{layer.name}/{key}"] = value
    ordered = {name: grads[name] for name, _ in model.named_params() if name in grads}
    return grad, ordered


def extract_features(model: Model, img, dtype=np.float32) -> np.ndarray:
    """512-dim feature vector(s) from the headless extractor.

    A single (50, 50, 3) image gives shape (512,); a batch gives (N, 512).
    Inference runs in float32 by default.
    """
    arr = np.asarray(img)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    if arr.shape[1:] != model.input_shape:
        raise DimensionError(f"{model.name}: expected images of shape {model.input_shape}, got {arr.shape[1:]}")
    feats = model.predict_proba(arr, batch_size=32, dtype=dtype)
    return feats[0] if single else feats


def fold_standardization(model: Model, mean, scale) -> Model:
    """Absorb ``(x - mean) / scale`` on the flattened input into the first dense layer.

    Used to ship a head trained on standardized features as a single weight
    file that accepts raw features. Modifies ``model`` in place.
    """
    dense = next((layer for layer in model.layers if layer.kind == "dense"), None)
    if dense is None:
        raise ConfigurationError(f"{model.name} has no dense layer to fold into")
    mean = np.asarray(mean, dtype=float).ravel()
    scale = np.asarray(scale, dtype=float).ravel()
    kernel = dense.params["kernel"]
    if mean.shape != (kernel.shape[0],) or scale.shape != mean.shape:
        raise DimensionError(f"standardization of width {mean.size} vs dense input {kernel.shape[0]}")
    scaled = kernel / scale[:, None]
    dense.params["bias"] = dense.params["bias"] - mean @ scaled
    dense.params["kernel"] = scaled
    model.version += 1
    return model
