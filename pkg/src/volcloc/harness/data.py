"""Datasets built from synthetic scenarios, event-level splits and normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadConfig, EmptySplit, ShapeMismatch, TooFewEvents
from ..geo import GeoPoint
from ..locator import N_STATIONS, TargetStandardizer
from ..signal import N_FEATURES, N_FRAMES, FeatureMatrix, extract_features, feature_stats, normalize_features, segment_event
from ..synth import Scenario, synth_waveform

NORMALIZATION_MODES = ("per_signal", "corpus")


@dataclass
class Dataset:
    """Raw log-spectral features of the observing stations, one row per event."""

    event_ids: list[str]
    raw: np.ndarray  # (E, 3, 39, 31)
    epicenters: list[GeoPoint]
    station_ids: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.shape[1:] != (N_STATIONS, N_FRAMES, N_FEATURES):
            raise ShapeMismatch(f"raw features must be (E, 3, {N_FRAMES}, {N_FEATURES}), got {self.raw.shape}")
        if not (len(self.event_ids) == len(self.epicenters) == self.raw.shape[0]):
            raise ShapeMismatch("event ids, epicenters and features disagree in length")

    def __len__(self) -> int:
        return len(self.event_ids)

    def index(self, ids) -> np.ndarray:
        pos = {e: i for i, e in enumerate(self.event_ids)}
        return np.array([pos[e] for e in ids], dtype=int)

    def subset(self, ids) -> "Dataset":
        idx = self.index(ids)
        return Dataset(
            [self.event_ids[i] for i in idx],
            self.raw[idx],
            [self.epicenters[i] for i in idx],
            self.station_ids,
            dict(self.extra),
        )


def build_dataset(scenario: Scenario, stations=None) -> Dataset:
    """Render every event at the observing stations and extract raw features.

    Segments are anchored on the catalog (true) P arrival.
    """
    stations = tuple(stations or scenario.observing)
    if len(stations) != N_STATIONS:
        raise BadConfig(f"need {N_STATIONS} observing stations, got {len(stations)}")
    E = len(scenario.events)
    raw = np.empty((E, N_STATIONS, N_FRAMES, N_FEATURES))
    for i, ev in enumerate(scenario.events):
        for j, sid in enumerate(stations):
            w, t_p, _ = synth_waveform(ev, sid, scenario.cfg)
            raw[i, j] = extract_features(segment_event(w, t_p)).values
    return Dataset(
        [e.event_id for e in scenario.events],
        raw,
        [e.true_epicenter for e in scenario.events],
        stations,
    )


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fr) or not math.isclose(math.fsum(fr), 1.0, abs_tol=1e-9):
            raise BadConfig("split fractions must be non-negative and sum to 1")


@dataclass(frozen=True)
class Splits:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


def split_dataset(event_ids, spec: SplitSpec = SplitSpec()) -> Splits:
    """Seeded shuffle of the event ids followed by a contiguous cut."""
    ids = sorted(set(event_ids))
    if len(ids) < 10:
        raise TooFewEvents(f"need at least 10 events to split, got {len(ids)}")
    order = np.random.default_rng(spec.seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = int(round(spec.train_frac * len(ids)))
    n_val = int(round(spec.val_frac * len(ids)))
    n_train = min(n_train, len(ids))
    n_val = min(n_val, len(ids) - n_train)
    return Splits(
        tuple(shuffled[:n_train]),
        tuple(shuffled[n_train : n_train + n_val]),
        tuple(shuffled[n_train + n_val :]),
    )


def fit_standardizer(train: Dataset) -> TargetStandardizer:
    if len(train) == 0:
        raise EmptySplit("training split is empty")
    return TargetStandardizer.fit(train.epicenters)


@dataclass
class Normalizer:
    """Feature normalization: per signal, or corpus statistics from the training split."""

    mode: str = "per_signal"
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in NORMALIZATION_MODES:
            raise BadConfig(f"unknown normalization mode {self.mode!r}")

    @classmethod
    def fit(cls, train: Dataset, mode: str = "per_signal") -> "Normalizer":
        if mode == "per_signal":
            return cls(mode)
        if len(train) == 0:
            raise EmptySplit("training split is empty")
        mean, std = feature_stats(train.raw.reshape(-1, N_FRAMES, N_FEATURES))
        return cls(mode, mean, std)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        stats = None if self.mode == "per_signal" else (self.mean, self.std)
        out = np.empty_like(raw)
        for idx in np.ndindex(raw.shape[:-2]):
            out[idx] = normalize_features(FeatureMatrix(raw[idx]), stats).values
        return out

    def to_dict(self) -> dict:
        d = {"mode": self.mode}
        if self.mode == "corpus":
            d["mean"] = self.mean.tolist()
            d["std"] = self.std.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        if d.get("mode", "per_signal") == "per_signal":
            return cls("per_signal")
        return cls("corpus", np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


@dataclass
class Prepared:
    """Network-ready arrays for one split."""

    event_ids: list[str]
    features: np.ndarray  # normalized, (E, 3, 39, 31)
    targets: np.ndarray  # standardized, (E, 2)
    epicenters: list[GeoPoint]


def prepare(ds: Dataset, norm: Normalizer, std: TargetStandardizer) -> Prepared:
    lat = [p.lat for p in ds.epicenters]
    lon = [p.lon for p in ds.epicenters]
    return Prepared(list(ds.event_ids), norm.apply(ds.raw), std.standardize(lat, lon), list(ds.epicenters))
