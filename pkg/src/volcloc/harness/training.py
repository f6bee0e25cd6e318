"""Mini-batch training with validation-based model selection."""

from __future__ import annotations

import io
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import BadConfig, DivergedLoss, ShapeMismatch
from ..geo import errors_km
from ..locator import N_STATIONS, Locator, stack_inputs
from ..nnet import LOSSES, OPTIMIZERS, OptimizerState
from .data import Prepared


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 8e-4
    dropout: float | None = 0.10  # None keeps the locator's own rate
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    loss: str = "mse"
    optimizer: str = "adam"

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise BadConfig("learning_rate must be finite and >= 0")
        if self.dropout is not None and not 0.0 <= self.dropout < 1.0:
            raise BadConfig("dropout must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise BadConfig("batch_size, max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise BadConfig("patience cannot exceed max_epochs")
        if self.loss not in LOSSES:
            raise BadConfig(f"unknown loss {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise BadConfig(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise BadConfig(f"unknown training keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_mae_km: list[float] = field(default_factory=list)
    best_epoch: int = -1  # 0-based index into the per-epoch lists
    wall_time_s: float = 0.0
    stopped_early: bool = False

    @property
    def best_val_mae_km(self) -> float:
        return self.val_mae_km[self.best_epoch]

    def to_csv(self) -> str:
        """Per-epoch table. Wall time is left out so reruns are byte-identical."""
        buf = io.StringIO()
        buf.write("epoch,train_loss,val_mae_km,is_best\n")
        for k, (tl, vm) in enumerate(zip(self.train_loss, self.val_mae_km)):
            buf.write(f"{k + 1},{tl!r},{vm!r},{int(k == self.best_epoch)}\n")
        return buf.getvalue()


def validation_mae_km(locator: Locator, data: Prepared) -> float:
    lat, lon = locator.predict(data.features)
    ref_lat = [p.lat for p in data.epicenters]
    ref_lon = [p.lon for p in data.epicenters]
    return float(np.mean(errors_km(ref_lat, ref_lon, lat, lon)))


def _check(locator: Locator, data: Prepared, name: str):
    if len(data.event_ids) == 0:
        raise ShapeMismatch(f"{name} split is empty")
    if data.targets.shape != (len(data.event_ids), 2):
        raise ShapeMismatch(f"{name} targets must be (E, 2), got {data.targets.shape}")
    stack_inputs(data.features[:1], locator.cfg)


def train(locator: Locator, train_data: Prepared, val_data: Prepared, cfg: TrainConfig = TrainConfig(),
          log=None) -> tuple[Locator, TrainHistory]:
    """Train ``locator`` in place and return it holding its best-validation parameters."""
    if locator.standardizer is None:
        raise BadConfig("fit the target standardizer before training")
    _check(locator, train_data, "training")
    _check(locator, val_data, "validation")
    if cfg.dropout is not None:
        locator.cfg = replace(locator.cfg, dropout_rate=cfg.dropout)
        locator.net.dropout = cfg.dropout

    net = locator.net
    loss_fn = LOSSES[cfg.loss]
    step_fn = OPTIMIZERS[cfg.optimizer]
    opt = OptimizerState(lr=cfg.learning_rate)
    params = net.params
    rng = np.random.default_rng(cfg.seed)
    ensemble = locator.cfg.input_mode == "per_station_ensemble"

    hist = TrainHistory()
    best = None
    best_val = math.inf
    since_best = 0
    t0 = time.perf_counter()
    n = len(train_data.event_ids)
    for epoch in range(cfg.max_epochs):
        epoch_start = net.snapshot()
        order = rng.permutation(n)
        total = 0.0
        for k in range(0, n, cfg.batch_size):
            idx = order[k : k + cfg.batch_size]
            x = stack_inputs(train_data.features[idx], locator.cfg)
            t = train_data.targets[idx]
            if ensemble:
                t = np.repeat(t, N_STATIONS, axis=0)
            y, cache = net.forward(x, training=True, rng=rng)
            value, dy = loss_fn(y, t)
            if not math.isfinite(value):
                net.load_state(epoch_start)
                hist.wall_time_s = time.perf_counter() - t0
                raise DivergedLoss(f"non-finite training loss in epoch {epoch + 1}", epoch_start, hist)
            total += value * len(idx)
            step_fn(params, net.backward(cache, dy), opt)

        val = validation_mae_km(locator, val_data) if _all_finite(params) else math.nan
        if not math.isfinite(val):
            net.load_state(epoch_start)
            hist.wall_time_s = time.perf_counter() - t0
            raise DivergedLoss(f"parameters or predictions became non-finite in epoch {epoch + 1}", epoch_start, hist)
        hist.train_loss.append(total / n)
        hist.val_mae_km.append(val)
        if val < best_val:
            best_val, best, since_best = val, net.snapshot(), 0
            hist.best_epoch = epoch
        else:
            since_best += 1
        if log is not None:
            log(f"epoch {epoch + 1} loss {total / n:.5f} val_mae_km {val:.4f}")
        if since_best >= cfg.patience:
            hist.stopped_early = True
            break

    net.load_state(best)
    hist.wall_time_s = time.perf_counter() - t0
    return locator, hist


def _all_finite(params: dict) -> bool:
    return all(np.all(np.isfinite(a)) for a in params.values())
