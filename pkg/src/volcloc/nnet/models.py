"""Networks assembled from the layers, exposing a uniform parameter/forward/backward surface.

Every network keeps its arrays inside the layer dataclasses and exposes them
through ``params``, an insertion-ordered name -> array dict whose values are
the very same arrays, so in-place optimizer updates reach the layers.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingCache, ShapeMismatch
from .layers import (
    ConvLayer,
    ConvParams,
    FcParams,
    LstmLayerParams,
    conv2d_backward,
    conv2d_forward,
    dropout_forward,
    fc_backward,
    fc_forward,
    lstm_stack_backward,
    lstm_stack_forward,
)


class Network:
    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        raise NotImplementedError

    @property
    def params(self) -> dict[str, np.ndarray]:
        return dict(self.named_arrays())

    @property
    def n_params(self) -> int:
        return sum(a.size for _, a in self.named_arrays())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_arrays()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, v in self.named_arrays():
            if state[k].shape != v.shape:
                raise ShapeMismatch(f"state array {k!r} has shape {state[k].shape}, expected {v.shape}")
            v[...] = state[k]

    def forward(self, x, training: bool = False, rng=None):
        raise NotImplementedError

    def backward(self, cache, dy) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        y, _ = self.forward(x, training=False, keep_cache=False)
        return y


def _lstm_names(stack):
    out = []
    for k, p in enumerate(stack):
        out += [(f"lstm{k}.{n}", getattr(p, n)) for n in p.names()]
    return out


def _fc_names(fc: FcParams):
    out = []
    for k, layer in enumerate(fc.layers):
        out += [(f"fc{k}.W", layer.W), (f"fc{k}.b", layer.b)]
    return out


def _conv_names(conv: ConvParams):
    out = []
    for k, layer in enumerate(conv.layers):
        out += [(f"conv{k}.W", layer.W), (f"conv{k}.b", layer.b)]
    return out


def _prefixed(prefix, grads_list):
    out = {}
    for k, g in enumerate(grads_list):
        for n, a in g.items():
            out[f"{prefix}{k}.{n}"] = a
    return out


class LstmRegressor(Network):
    """Stacked LSTM whose last-frame output feeds a dense head."""

    def __init__(self, stack: list[LstmLayerParams], fc: FcParams, dropout: float = 0.0):
        self.stack = stack
        self.fc = fc
        self.dropout = dropout

    def named_arrays(self):
        return _lstm_names(self.stack) + _fc_names(self.fc)

    def forward(self, x, training=False, rng=None, keep_cache=True):
        x = np.asarray(x, dtype=float)
        unbatched = x.ndim == 2
        h, lstm_cache, _ = lstm_stack_forward(x[None] if unbatched else x, self.stack, keep_cache=keep_cache)
        y, fc_cache = fc_forward(h, self.fc, self.dropout, rng, training)
        cache = (lstm_cache, fc_cache) if keep_cache else None
        return (y[0] if unbatched else y), cache

    def backward(self, cache, dy):
        if cache is None:
            raise MissingCache("forward pass was run without caches")
        lstm_cache, fc_cache = cache
        fc_grads, dh = fc_backward(dy, fc_cache, self.fc)
        lstm_grads, _ = lstm_stack_backward(dh, lstm_cache, self.stack)
        grads = _prefixed("lstm", lstm_grads)
        grads.update(_prefixed("fc", fc_grads))
        return grads


class CnnRegressor(Network):
    """3x3 'same' convolution stack, flattened into a dense head.

    Dropout follows every convolution and every hidden dense layer.
    """

    def __init__(self, conv: ConvParams, fc: FcParams, dropout: float = 0.0):
        self.conv = conv
        self.fc = fc
        self.dropout = dropout

    def named_arrays(self):
        return _fc_names(self.fc) + _conv_names(self.conv)

    def forward(self, x, training=False, rng=None, keep_cache=True):
        x = np.asarray(x, dtype=float)
        unbatched = x.ndim == 3
        if unbatched:
            x = x[None]
        caches = []
        for layer in self.conv.layers:
            x, cc = conv2d_forward(x, layer)
            x, mask = dropout_forward(x, self.dropout, rng, training)
            caches.append((cc, mask))
        shape = x.shape
        y, fc_cache = fc_forward(x.reshape(shape[0], -1), self.fc, self.dropout, rng, training)
        cache = (caches, shape, fc_cache) if keep_cache else None
        return (y[0] if unbatched else y), cache

    def backward(self, cache, dy):
        if cache is None:
            raise MissingCache("forward pass was run without caches")
        caches, shape, fc_cache = cache
        fc_grads, dx = fc_backward(dy, fc_cache, self.fc)
        dx = dx.reshape(shape)
        conv_grads = [None] * len(self.conv.layers)
        for k in range(len(self.conv.layers) - 1, -1, -1):
            cc, mask = caches[k]
            if mask is not None:
                dx = dx * mask
            conv_grads[k], dx = conv2d_backward(dx, cc, self.conv.layers[k])
        grads = _prefixed("fc", fc_grads)
        grads.update(_prefixed("conv", conv_grads))
        return grads


class LstmOnly(Network):
    """Bare LSTM stack emitting the top layer's last-frame output."""

    def __init__(self, stack: list[LstmLayerParams]):
        self.stack = stack

    def named_arrays(self):
        return _lstm_names(self.stack)

    def forward(self, x, training=False, rng=None, keep_cache=True):
        h, caches, _ = lstm_stack_forward(x, self.stack, keep_cache=keep_cache)
        return h, caches

    def backward(self, cache, dy):
        grads, _ = lstm_stack_backward(dy, cache, self.stack)
        return _prefixed("lstm", grads)


class FcOnly(Network):
    def __init__(self, fc: FcParams, dropout: float = 0.0):
        self.fc = fc
        self.dropout = dropout

    def named_arrays(self):
        return _fc_names(self.fc)

    def forward(self, x, training=False, rng=None, keep_cache=True):
        return fc_forward(x, self.fc, self.dropout, rng, training)

    def backward(self, cache, dy):
        grads, _ = fc_backward(dy, cache, self.fc)
        return _prefixed("fc", grads)


class ConvOnly(Network):
    """Convolution stack whose flattened activations are the output."""

    def __init__(self, conv: ConvParams):
        self.conv = conv

    def named_arrays(self):
        return _conv_names(self.conv)

    def forward(self, x, training=False, rng=None, keep_cache=True):
        x = np.asarray(x, dtype=float)
        caches = []
        for layer in self.conv.layers:
            x, cc = conv2d_forward(x, layer)
            caches.append(cc)
        return x.reshape(x.shape[0], -1), (caches, x.shape)

    def backward(self, cache, dy):
        caches, shape = cache
        dx = np.asarray(dy).reshape(shape)
        grads = [None] * len(caches)
        for k in range(len(caches) - 1, -1, -1):
            grads[k], dx = conv2d_backward(dx, caches[k], self.conv.layers[k])
        return _prefixed("conv", grads)


def conv_stack(rng, in_channels: int, filters: list[int]) -> ConvParams:
    layers = []
    c = in_channels
    for f in filters:
        layers.append(ConvLayer.init(rng, c, f))
        c = f
    return ConvParams(layers)
