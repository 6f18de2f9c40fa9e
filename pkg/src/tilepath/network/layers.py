"""Layer kinds used by the three architectures.

All layers work on channels-last batches: images are (N, H, W, C), vectors
(N, D). ``forward`` returns ``(output, cache)`` and ``backward`` maps the
upstream gradient and that cache to ``(input_gradient, parameter_grads)``.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError


class Layer:
    kind = "layer"

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return input_shape

    def init_params(self, input_shape, rng) -> None:
        pass

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout, cache):
        raise NotImplementedError

    def _p(self, key, dtype):
        p = self.params[key]
        return p if p.dtype == dtype else p.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def kaiming_uniform(shape, fan_in: int, rng) -> np.ndarray:
    # rounded through float32 so freshly built models survive the f32 weight file exactly
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32).astype(np.float64)


class Conv2D(Layer):
    """3x3 convolution, stride 1, zero 'same' padding; kernel is (3, 3, C_in, C_out)."""

    kind = "conv2d"
    size = 3

    def __init__(self, name, filters: int):
        super().__init__(name)
        self.filters = filters

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise DimensionError(f"{self.name}: expected (H, W, C) input, got {input_shape}")
        h, w, _ = input_shape
        return (h, w, self.filters)

    def init_params(self, input_shape, rng):
        c_in = input_shape[2]
        k = self.size
        self.params["kernel"] = kaiming_uniform((k, k, c_in, self.filters), k * k * c_in, rng)
        self.params["bias"] = np.zeros(self.filters)

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        kern = self._p("kernel", x.dtype).reshape(9 * c, self.filters)
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        # (N, H, W, C, 3, 3) window view -> rows ordered (i, j, c) to match the kernel layout
        cols = sliding_window_view(xp, (3, 3), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3).reshape(-1, 9 * c)
        out = cols @ kern + self._p("bias", x.dtype)
        return out.reshape(n, h, w, self.filters), (cols, x.shape)

    def backward(self, dout, cache):
        cols, (n, h, w, c) = cache
        f = dout.shape[3]
        g = dout.reshape(-1, f)
        kern = self.params["kernel"]
        grads = {"kernel": (cols.T @ g).reshape(kern.shape), "bias": g.sum(axis=0)}
        dcols = (g @ kern.reshape(9 * c, f).T).reshape(n, h, w, 3, 3, c)
        dxp = np.zeros((n, h + 2, w + 2, c), dtype=dout.dtype)
        for i in range(3):
            for j in range(3):
                dxp[:, i:i + h, j:j + w, :] += dcols[:, :, :, i, j, :]
        return dxp[:, 1:-1, 1:-1, :], grads


class MaxPool2D(Layer):
    """2x2 max pooling with stride 2; ``rounding`` picks floor or ceil output extents."""

    kind = "maxpool2d"

    def __init__(self, name, rounding: str = "floor"):
        super().__init__(name)
        if rounding not in ("floor", "ceil"):
            raise ValueError(f"rounding must be 'floor' or 'ceil', got {rounding!r}")
        self.rounding = rounding

    def _extent(self, n: int) -> int:
        return n // 2 if self.rounding == "floor" else -(-n // 2)

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise DimensionError(f"{self.name}: expected (H, W, C) input, got {input_shape}")
        h, w, c = input_shape
        ho, wo = self._extent(h), self._extent(w)
        if ho < 1 or wo < 1:
            raise DimensionError(f"{self.name}: input {input_shape} too small to pool")
        return (ho, wo, c)

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        ho, wo = self._extent(h), self._extent(w)
        if self.rounding == "ceil" and (h % 2 or w % 2):
            x = np.pad(x, ((0, 0), (0, 2 * ho - h), (0, 2 * wo - w), (0, 0)),
                       constant_values=-np.inf)
        else:
            x = x[:, :2 * ho, :2 * wo, :]
        win = x.reshape(n, ho, 2, wo, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
        arg = win.argmax(axis=-1)
        out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        return out, (arg, (n, h, w, c))

    def backward(self, dout, cache):
        arg, (n, h, w, c) = cache
        ho, wo = dout.shape[1:3]
        win = np.zeros(dout.shape + (4,), dtype=dout.dtype)
        np.put_along_axis(win, arg[..., None], dout[..., None], axis=-1)
        full = win.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
        dx = np.zeros((n, h, w, c), dtype=dout.dtype)
        hh, ww = min(h, 2 * ho), min(w, 2 * wo)
        dx[:, :hh, :ww] = full[:, :hh, :ww]
        return dx, {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, name, units: int):
        super().__init__(name)
        self.units = units

    def output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise DimensionError(f"{self.name}: expected flat input, got {input_shape}")
        return (self.units,)

    def init_params(self, input_shape, rng):
        fan_in = input_shape[0]
        self.params["kernel"] = kaiming_uniform((fan_in, self.units), fan_in, rng)
        self.params["bias"] = np.zeros(self.units)

    def forward(self, x, train=False, rng=None):
        return x @ self._p("kernel", x.dtype) + self._p("bias", x.dtype), x

    def backward(self, dout, cache):
        x = cache
        grads = {"kernel": x.T @ dout, "bias": dout.sum(axis=0)}
        return dout @ self.params["kernel"].T, grads


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache):
        return dout.reshape(cache), {}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train=False, rng=None):
        mask = x > 0
        return np.where(mask, x, 0.0).astype(x.dtype, copy=False), mask

    def backward(self, dout, cache):
        return np.where(cache, dout, 0.0), {}


class Dropout(Layer):
    """Inverted dropout: in training, kept units are scaled by 1 / (1 - rate)."""

    kind = "dropout"

    def __init__(self, name, rate: float = 0.5):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError(f"{self.name}: training-mode dropout needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dout, cache):
        return (dout if cache is None else dout * cache), {}


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, train=False, rng=None):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        s = e / e.sum(axis=1, keepdims=True)
        return s, s

    def backward(self, dout, cache):
        s = cache
        return s * (dout - np.sum(dout * s, axis=1, keepdims=True)), {}


def softmax(logits) -> np.ndarray:
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    out, _ = Softmax("softmax").forward(z)
    return out if np.ndim(logits) > 1 else out[0]


def cross_entropy(probs, label: int) -> float:
    """Negative log-probability of ``label``; probabilities are clamped at 1e-12."""
    p = np.asarray(probs, dtype=float)
    return float(-np.log(max(p[int(label)], 1e-12)))
