import numpy as np


def loss_mse(pred, target):
    """Mean squared error over every component; returns (loss, d loss / d pred)."""
    pred = np.asarray(pred, dtype=float)
    diff = pred - np.asarray(target, dtype=float)
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def loss_mae(pred, target):
    """Mean absolute error; the subgradient at zero difference is 0."""
    pred = np.asarray(pred, dtype=float)
    diff = pred - np.asarray(target, dtype=float)
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


LOSSES = {"mse": loss_mse, "mae": loss_mae}
