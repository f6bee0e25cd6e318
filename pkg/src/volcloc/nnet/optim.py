"""Adam and plain SGD updates over named parameter dicts (updated in place)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class OptimizerState:
    lr: float = 8e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict, grads: dict, st: OptimizerState):
    """One bias-corrected Adam update. Mutates and returns ``params`` and ``st``."""
    for k, g in grads.items():
        if k not in params or params[k].shape != g.shape:
            raise ShapeMismatch(f"gradient {k!r} does not match its parameter")
    st.step += 1
    bc1 = 1.0 - st.beta1**st.step
    bc2 = 1.0 - st.beta2**st.step
    for k, g in grads.items():
        if k not in st.m:
            st.m[k] = np.zeros_like(g)
            st.v[k] = np.zeros_like(g)
        m, v = st.m[k], st.v[k]
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * (g * g)
        params[k] -= st.lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)
    return params, st


def sgd_step(params: dict, grads: dict, st: OptimizerState):
    for k, g in grads.items():
        if k not in params or params[k].shape != g.shape:
            raise ShapeMismatch(f"gradient {k!r} does not match its parameter")
    st.step += 1
    for k, g in grads.items():
        params[k] -= st.lr * g
    return params, st


OPTIMIZERS = {"adam": adam_step, "sgd": sgd_step}
