"""Forward and backward passes for the LSTM, dense and 3x3 convolution layers.

All functions work on batches: sequences are (B, T, D), dense inputs (B, D)
and images (B, C, H, W). Unbatched inputs are accepted by the public forward
functions and returned unbatched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import EmptySequence, MissingCache, ShapeMismatch

GATES = ("i", "f", "o", "c")


def sigmoid(x):
    return expit(x)


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------- LSTM


@dataclass
class LstmLayerParams:
    """Gate matrices of one LSTM layer; biases are zero unless ``bias`` is set."""

    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_c: np.ndarray
    b_i: np.ndarray | None = None
    b_f: np.ndarray | None = None
    b_o: np.ndarray | None = None
    b_c: np.ndarray | None = None

    def __post_init__(self):
        d_out, d_in = self.W_i.shape
        for g in GATES:
            if getattr(self, f"W_{g}").shape != (d_out, d_in):
                raise ShapeMismatch(f"W_{g} must be {(d_out, d_in)}")
            if getattr(self, f"U_{g}").shape != (d_out, d_out):
                raise ShapeMismatch(f"U_{g} must be {(d_out, d_out)}")
            b = getattr(self, f"b_{g}")
            if b is not None and b.shape != (d_out,):
                raise ShapeMismatch(f"b_{g} must have length {d_out}")

    @property
    def d_in(self) -> int:
        return self.W_i.shape[1]

    @property
    def d_out(self) -> int:
        return self.W_i.shape[0]

    @property
    def bias(self) -> bool:
        return self.b_i is not None

    def names(self) -> list[str]:
        """Array names in checkpoint declaration order."""
        names = [f"W_{g}" for g in GATES] + [f"U_{g}" for g in GATES]
        if self.bias:
            names += [f"b_{g}" for g in GATES]
        return names

    def stacked(self):
        W = np.concatenate([getattr(self, f"W_{g}") for g in GATES], axis=0)
        U = np.concatenate([getattr(self, f"U_{g}") for g in GATES], axis=0)
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES]) if self.bias else None
        return W, U, b

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = False, forget_bias: float = 1.0):
        kw = {}
        for g in GATES:
            kw[f"W_{g}"] = uniform_init(rng, (d_out, d_in), d_in)
        for g in GATES:
            kw[f"U_{g}"] = uniform_init(rng, (d_out, d_out), d_out)
        if bias:
            for g in GATES:
                kw[f"b_{g}"] = np.full(d_out, forget_bias if g == "f" else 0.0)
        return cls(**kw)


@dataclass
class LstmStackState:
    h: list[np.ndarray]
    c: list[np.ndarray]

    @classmethod
    def zeros(cls, stack, batch: int | None = None):
        shape = (lambda d: (d,)) if batch is None else (lambda d: (batch, d))
        return cls([np.zeros(shape(p.d_out)) for p in stack], [np.zeros(shape(p.d_out)) for p in stack])


def lstm_cell_forward(z, h_prev, c_prev, p: LstmLayerParams):
    """One LSTM step. Returns (h, c, cache) with cache holding gate activations."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != p.d_in or h_prev.shape[-1] != p.d_out or c_prev.shape[-1] != p.d_out:
        raise ShapeMismatch("cell input shapes do not match layer parameters")
    a = {}
    for g in GATES:
        a[g] = z @ getattr(p, f"W_{g}").T + h_prev @ getattr(p, f"U_{g}").T
        if p.bias:
            a[g] = a[g] + getattr(p, f"b_{g}")
    i, f, o = sigmoid(a["i"]), sigmoid(a["f"]), sigmoid(a["o"])
    g = np.tanh(a["c"])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    cache = {"z": z, "h_prev": h_prev, "c_prev": c_prev, "i": i, "f": f, "o": o, "g": g, "c": c}
    return h, c, cache


@dataclass
class LstmLayerCache:
    x: np.ndarray  # (B, T, d_in)
    gates: np.ndarray  # (B, T, 4d) activated i, f, o, g
    h: np.ndarray  # (B, T + 1, d): h[:, 0] is the initial state
    c: np.ndarray  # (B, T + 1, d)
    tc: np.ndarray  # (B, T, d) tanh(c_t)

    def nbytes(self) -> int:
        return self.x.nbytes + self.gates.nbytes + self.h.nbytes + self.c.nbytes + self.tc.nbytes


def _lstm_layer_forward(x, p: LstmLayerParams, h0, c0, keep_cache: bool):
    B, T, _ = x.shape
    d = p.d_out
    W, U, b = p.stacked()
    ax = x @ W.T
    if b is not None:
        ax += b
    h, c = h0, c0
    if keep_cache:
        gates = np.empty((B, T, 4 * d))
        hs = np.empty((B, T + 1, d))
        cs = np.empty((B, T + 1, d))
        tcs = np.empty((B, T, d))
        hs[:, 0], cs[:, 0] = h0, c0
    out = np.empty((B, T, d))
    for t in range(T):
        a = ax[:, t] + h @ U.T
        s = sigmoid(a[:, : 3 * d])
        g = np.tanh(a[:, 3 * d :])
        c = s[:, d : 2 * d] * c + s[:, :d] * g
        tc = np.tanh(c)
        h = s[:, 2 * d : 3 * d] * tc
        out[:, t] = h
        if keep_cache:
            gates[:, t, : 3 * d] = s
            gates[:, t, 3 * d :] = g
            hs[:, t + 1], cs[:, t + 1], tcs[:, t] = h, c, tc
    cache = LstmLayerCache(x, gates, hs, cs, tcs) if keep_cache else None
    return out, h, c, cache


def lstm_stack_forward(seq, stack: list[LstmLayerParams], init: LstmStackState | None = None, keep_cache: bool = True):
    """Run the stacked LSTM over a sequence.

    Returns ``(h_T, caches, final_state)``: the top layer's output at the last
    frame, per-layer caches for BPTT (None entries when ``keep_cache`` is
    False) and the final state of every layer.
    """
    seq = np.asarray(seq, dtype=float)
    unbatched = seq.ndim == 2
    if unbatched:
        seq = seq[None]
    if seq.ndim != 3:
        raise ShapeMismatch("sequence must be (T, D) or (B, T, D)")
    B, T, D = seq.shape
    if T < 1:
        raise EmptySequence("sequence has no frames")
    if not stack:
        raise ShapeMismatch("empty LSTM stack")
    d_expected = D
    for k, p in enumerate(stack):
        if p.d_in != d_expected:
            raise ShapeMismatch(f"layer {k} expects input {p.d_in}, gets {d_expected}")
        d_expected = p.d_out
    if init is None:
        init = LstmStackState.zeros(stack, B)
    elif unbatched:
        init = LstmStackState([h[None] for h in init.h], [c[None] for c in init.c])

    x = seq
    caches, hs, cs = [], [], []
    for k, p in enumerate(stack):
        x, h, c, cache = _lstm_layer_forward(x, p, init.h[k], init.c[k], keep_cache)
        caches.append(cache)
        hs.append(h)
        cs.append(c)
    h_top = x[:, -1]
    state = LstmStackState(hs, cs)
    if unbatched:
        h_top = h_top[0]
        state = LstmStackState([h[0] for h in hs], [c[0] for c in cs])
    return h_top, caches, state


def _lstm_layer_backward(dout, cache: LstmLayerCache, p: LstmLayerParams):
    """``dout`` is dL/dh_t for every frame, shape (B, T, d)."""
    B, T, d = dout.shape
    W, U, _ = p.stacked()
    gates = cache.gates
    dA = np.empty((B, T, 4 * d))
    dh_next = np.zeros((B, d))
    dc_next = np.zeros((B, d))
    for t in range(T - 1, -1, -1):
        i = gates[:, t, :d]
        f = gates[:, t, d : 2 * d]
        o = gates[:, t, 2 * d : 3 * d]
        g = gates[:, t, 3 * d :]
        tc = cache.tc[:, t]
        dh = dout[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dA[:, t, :d] = dc * g * i * (1.0 - i)
        dA[:, t, d : 2 * d] = dc * cache.c[:, t] * f * (1.0 - f)
        dA[:, t, 2 * d : 3 * d] = dh * tc * o * (1.0 - o)
        dA[:, t, 3 * d :] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = dA[:, t] @ U
    flat = dA.reshape(-1, 4 * d)
    dW = flat.T @ cache.x.reshape(-1, cache.x.shape[-1])
    dU = flat.T @ cache.h[:, :T].reshape(-1, d)
    grads = {}
    for k, gname in enumerate(GATES):
        grads[f"W_{gname}"] = dW[k * d : (k + 1) * d]
        grads[f"U_{gname}"] = dU[k * d : (k + 1) * d]
    if p.bias:
        db = flat.sum(axis=0)
        for k, gname in enumerate(GATES):
            grads[f"b_{gname}"] = db[k * d : (k + 1) * d]
    dx = dA @ W
    return grads, dx


def lstm_stack_backward(dh_top, caches, stack: list[LstmLayerParams]):
    """Full BPTT from a gradient on the top layer's last-frame output.

    Returns (per-layer gradient dicts, gradient wrt the input sequence).
    """
    if not caches or any(c is None for c in caches):
        raise MissingCache("forward pass was run without caches")
    dh_top = np.asarray(dh_top, dtype=float)
    if dh_top.ndim == 1:
        dh_top = dh_top[None]
    B, T, _ = caches[-1].tc.shape
    dout = np.zeros((B, T, stack[-1].d_out))
    dout[:, -1] = dh_top
    layer_grads = [None] * len(stack)
    for k in range(len(stack) - 1, -1, -1):
        layer_grads[k], dout = _lstm_layer_backward(dout, caches[k], stack[k])
    return layer_grads, dout


# ---------------------------------------------------------------- dense


@dataclass
class FcLayer:
    W: np.ndarray  # (d_out, d_in)
    b: np.ndarray
    activation: str = "relu"  # relu | identity

    def names(self) -> list[str]:
        return ["W", "b"]


@dataclass
class FcParams:
    layers: list[FcLayer] = field(default_factory=list)

    @classmethod
    def init(cls, rng: np.random.Generator, widths: list[int]):
        """Dense chain through ``widths``; hidden layers use the rectifier, the last is affine."""
        layers = []
        for k, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            act = "identity" if k == len(widths) - 2 else "relu"
            layers.append(FcLayer(uniform_init(rng, (b, a), a), np.zeros(b), act))
        return cls(layers)


def dropout_forward(x, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout; returns (output, scaled mask or None)."""
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def fc_forward(x, p: FcParams, dropout_rate: float = 0.0, rng=None, training: bool = False):
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    x = np.asarray(x, dtype=float)
    unbatched = x.ndim == 1
    if unbatched:
        x = x[None]
    cache = []
    for k, layer in enumerate(p.layers):
        if x.shape[-1] != layer.W.shape[1]:
            raise ShapeMismatch(f"dense layer {k} expects {layer.W.shape[1]} inputs, got {x.shape[-1]}")
        inp = x
        a = x @ layer.W.T + layer.b
        mask = None
        if layer.activation == "relu":
            x = np.maximum(a, 0.0)
            if k < len(p.layers) - 1:
                x, mask = dropout_forward(x, dropout_rate, rng, training)
        else:
            x = a
        cache.append((inp, a, mask))
    return (x[0] if unbatched else x), cache


def fc_backward(dy, cache, p: FcParams):
    if cache is None or len(cache) != len(p.layers):
        raise MissingCache("no dense-layer cache")
    dy = np.asarray(dy, dtype=float)
    if dy.ndim == 1:
        dy = dy[None]
    grads = [None] * len(p.layers)
    for k in range(len(p.layers) - 1, -1, -1):
        layer = p.layers[k]
        inp, a, mask = cache[k]
        if mask is not None:
            dy = dy * mask
        if layer.activation == "relu":
            dy = dy * (a > 0)
        grads[k] = {"W": dy.T @ inp, "b": dy.sum(axis=0)}
        dy = dy @ layer.W
    return grads, dy


# ---------------------------------------------------------------- convolution


@dataclass
class ConvLayer:
    W: np.ndarray  # (n_filters, in_channels, 3, 3)
    b: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 4 or self.W.shape[2:] != (3, 3):
            raise ShapeMismatch("conv filters must be (F, C, 3, 3)")

    def names(self) -> list[str]:
        return ["W", "b"]

    @classmethod
    def init(cls, rng: np.random.Generator, in_channels: int, n_filters: int):
        fan_in = in_channels * 9
        return cls(uniform_init(rng, (n_filters, in_channels, 3, 3), fan_in), np.zeros(n_filters))


@dataclass
class ConvParams:
    layers: list[ConvLayer] = field(default_factory=list)


def _im2col(x):
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # (B, C, H, W, 3, 3)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(B * H * W, C * 9)


def conv2d_forward(x, layer: ConvLayer, activation: str = "relu"):
    """Stride-1 'same' 3x3 convolution followed by the rectifier."""
    x = np.asarray(x, dtype=float)
    unbatched = x.ndim == 3
    if unbatched:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != layer.W.shape[1]:
        raise ShapeMismatch(f"conv expects {layer.W.shape[1]} input channels")
    B, C, H, W = x.shape
    F = layer.W.shape[0]
    cols = _im2col(x)
    a = cols @ layer.W.reshape(F, -1).T + layer.b
    a = a.reshape(B, H, W, F).transpose(0, 3, 1, 2)
    y = np.maximum(a, 0.0) if activation == "relu" else a
    cache = (x.shape, cols, a if activation == "relu" else None)
    return (y[0] if unbatched else y), cache


def conv2d_backward(dy, cache, layer: ConvLayer):
    if cache is None:
        raise MissingCache("no conv cache")
    (B, C, H, W), cols, a = cache
    dy = np.asarray(dy, dtype=float)
    if dy.ndim == 3:
        dy = dy[None]
    if a is not None:
        dy = dy * (a > 0)
    F = layer.W.shape[0]
    dflat = dy.transpose(0, 2, 3, 1).reshape(-1, F)
    grads = {"W": (dflat.T @ cols).reshape(layer.W.shape), "b": dflat.sum(axis=0)}
    dcols = (dflat @ layer.W.reshape(F, -1)).reshape(B, H, W, C, 3, 3)
    dxp = np.zeros((B, C, H + 2, W + 2))
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki : ki + H, kj : kj + W] += dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return grads, dxp[:, :, 1:-1, 1:-1]
