"""Central finite-difference check of a network's analytic gradients."""

from __future__ import annotations

import numpy as np

from .loss import loss_mse


def relative_error(a, n):
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def grad_check(model, batch, step: float = 1e-5, training: bool = False, seed: int = 0,
               max_coords: int | None = None, loss=loss_mse) -> float:
    """Largest relative error between backprop and central differences.

    ``batch`` is an (inputs, targets) pair. Every parameter coordinate is
    checked unless ``max_coords`` is given, in which case a seeded random
    subsample of that many coordinates (at least 200) is drawn. In training
    mode the dropout masks are frozen by reseeding before every pass.
    """
    x, target = batch

    def run(cache_wanted):
        rng = np.random.default_rng(seed)
        y, cache = model.forward(x, training=training, rng=rng)
        value, dy = loss(y, target)
        return value, dy, cache

    _, dy, cache = run(True)
    analytic = model.backward(cache, dy)
    params = model.params

    coords = [(k, i) for k, arr in params.items() for i in range(arr.size)]
    if max_coords is not None and len(coords) > max_coords:
        pick = np.random.default_rng(seed).choice(len(coords), size=max(200, max_coords), replace=False)
        coords = [coords[j] for j in sorted(pick)]

    worst = 0.0
    for k, i in coords:
        flat = params[k].reshape(-1)
        old = flat[i]
        flat[i] = old + step
        f_plus = run(False)[0]
        flat[i] = old - step
        f_minus = run(False)[0]
        flat[i] = old
        numeric = (f_plus - f_minus) / (2.0 * step)
        worst = max(worst, float(relative_error(analytic[k].reshape(-1)[i], numeric)))
    return worst
