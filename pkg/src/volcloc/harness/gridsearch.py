"""Hyperparameter search over the LSTM locator, ranked by validation MAE."""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import BadConfig, DivergedLoss, EmptySpace
from ..locator import PRESETS, Locator, LocatorConfig, TargetStandardizer, build_locator, with_overrides
from .data import Prepared
from .training import TrainConfig, TrainHistory, train

ALLOWED = {
    "lstm_layers": (1, 2, 3, 4, 5, 6),
    "lstm_dim": (32, 64, 128, 256, 512),
    "fc_layers": (1, 2, 3),
    "learning_rate": (8e-6, 8e-5, 8e-4, 8e-3, 8e-2, 8e-1),
    "dropout": (0.0, 0.1, 0.3, 0.5),
}
AXES = tuple(ALLOWED)
DEFAULT_BUDGET = 24


@dataclass(frozen=True)
class GridSpace:
    lstm_layers: tuple[int, ...] = ALLOWED["lstm_layers"]
    lstm_dim: tuple[int, ...] = ALLOWED["lstm_dim"]
    fc_layers: tuple[int, ...] = ALLOWED["fc_layers"]
    learning_rate: tuple[float, ...] = ALLOWED["learning_rate"]
    dropout: tuple[float, ...] = ALLOWED["dropout"]

    def __post_init__(self):
        for axis in AXES:
            values = tuple(getattr(self, axis))
            object.__setattr__(self, axis, values)
            if not values:
                raise EmptySpace(f"axis {axis!r} is empty")
            for v in values:
                if not any(math.isclose(v, a, rel_tol=1e-12) for a in ALLOWED[axis]):
                    raise BadConfig(f"{axis} value {v!r} lies outside {ALLOWED[axis]}")

    @property
    def size(self) -> int:
        return math.prod(len(getattr(self, a)) for a in AXES)

    def points(self) -> list[dict]:
        return [dict(zip(AXES, combo)) for combo in itertools.product(*(getattr(self, a) for a in AXES))]

    def sample(self, budget: int, seed: int = 0) -> list[dict]:
        """Full grid when it fits the budget, else a seeded subsample in grid order."""
        if budget < 1:
            raise BadConfig("budget must be >= 1")
        pts = self.points()
        if len(pts) <= budget:
            return pts
        keep = np.sort(np.random.default_rng(seed).choice(len(pts), size=budget, replace=False))
        return [pts[i] for i in keep]

    def to_dict(self) -> dict:
        return {a: list(getattr(self, a)) for a in AXES}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpace":
        extra = set(d) - set(AXES)
        if extra:
            raise BadConfig(f"unknown grid axes: {sorted(extra)}")
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass
class Trial:
    point: dict
    val_mae_km: float
    best_epoch: int
    status: str  # "ok" or "diverged"
    history: TrainHistory | None = None


@dataclass
class GridResult:
    trials: list[Trial]  # ranked, best first
    best: Locator | None
    best_history: TrainHistory | None = None

    @property
    def best_point(self) -> dict:
        return self.trials[0].point

    def ranking_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rank," + ",".join(AXES) + ",val_mae_km,best_epoch,status\n")
        for r, t in enumerate(self.trials, 1):
            vals = ",".join(repr(t.point[a]) for a in AXES)
            buf.write(f"{r},{vals},{t.val_mae_km!r},{t.best_epoch + 1},{t.status}\n")
        return buf.getvalue()


def grid_search(space: GridSpace, train_data: Prepared, val_data: Prepared, standardizer: TargetStandardizer,
                budget: int = DEFAULT_BUDGET, base: LocatorConfig = PRESETS["desk_lstm"],
                train_cfg: TrainConfig = TrainConfig(), seed: int = 0, log=None) -> GridResult:
    """Train every sampled point with the same seeds and rank by best validation MAE.

    A diverging trial ranks last with an infinite MAE.
    """
    if space.size == 0:
        raise EmptySpace("grid space has no points")
    trials: list[tuple[Trial, Locator | None]] = []
    for k, pt in enumerate(space.sample(budget, seed)):
        cfg = with_overrides(base, lstm_layers=pt["lstm_layers"], lstm_dim=pt["lstm_dim"],
                             fc_layers=pt["fc_layers"], dropout_rate=pt["dropout"])
        loc = build_locator(cfg, seed=seed, standardizer=standardizer)
        tc = replace(train_cfg, learning_rate=pt["learning_rate"], dropout=pt["dropout"])
        try:
            loc, hist = train(loc, train_data, val_data, tc)
            trial = Trial(pt, hist.best_val_mae_km, hist.best_epoch, "ok", hist)
        except DivergedLoss as exc:
            hist = exc.history
            trial = Trial(pt, math.inf, -1, "diverged", hist)
            loc = None
        if log is not None:
            log(f"trial {k + 1}: {pt} -> {trial.val_mae_km:.4f} km ({trial.status})")
        trials.append((trial, loc))
    order = sorted(range(len(trials)), key=lambda i: (trials[i][0].val_mae_km, i))
    ranked = [trials[i][0] for i in order]
    best_loc = trials[order[0]][1]
    return GridResult(ranked, best_loc, ranked[0].history)
