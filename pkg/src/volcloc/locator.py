"""End-to-end epicenter regressors: the LSTM locator and the CNN baseline.

A locator bundles a network, the configuration it was built from, the target
standardizer and the feature-normalization mode, and round-trips through a
``.vloc`` checkpoint.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import BadConfig, BadInput, DegenerateTargets, EmptySplit, ShapeMismatch
from .geo import GeoPoint
from .nnet import (
    CnnRegressor,
    FcParams,
    LstmLayerParams,
    LstmRegressor,
    Network,
    conv_stack,
    dumps_vloc,
    loads_vloc,
)
from .signal import N_FEATURES, N_FRAMES, FeatureMatrix

N_STATIONS = 3
INPUT_MODES = ("concat3", "per_station_ensemble")
INIT_RULE = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases 0, forget bias 1 in bias mode"


@dataclass(frozen=True)
class LocatorConfig:
    model_kind: str = "lstm"
    lstm_layers: int = 2
    lstm_dim: int = 64
    fc_layers: int = 2
    dropout_rate: float = 0.10
    input_mode: str = "concat3"
    bias_mode: bool = False
    conv_filters: int = 16
    conv_layers: int = 4
    cnn_hidden: int = 64

    def validate(self) -> "LocatorConfig":
        if self.model_kind not in ("lstm", "cnn"):
            raise BadConfig(f"unknown model kind {self.model_kind!r}")
        if self.input_mode not in INPUT_MODES:
            raise BadConfig(f"unknown input mode {self.input_mode!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise BadConfig("dropout_rate must lie in [0, 1)")
        if self.model_kind == "lstm":
            if not 1 <= self.lstm_layers <= 6:
                raise BadConfig("lstm_layers must lie in 1..6")
            if not 1 <= self.lstm_dim <= 512:
                raise BadConfig("lstm_dim must lie in 1..512")
            if not 1 <= self.fc_layers <= 3:
                raise BadConfig("fc_layers must lie in 1..3")
        else:
            if self.conv_filters < 1 or self.conv_layers < 1 or self.cnn_hidden < 1:
                raise BadConfig("conv_filters, conv_layers and cnn_hidden must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LocatorConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise BadConfig(f"unknown locator keys: {sorted(extra)}")
        return cls(**d)


PRESETS = {
    "paper_lstm": LocatorConfig("lstm", 4, 256, 2, 0.10),
    "desk_lstm": LocatorConfig("lstm", 2, 64, 2, 0.10),
    "paper_cnn": LocatorConfig("cnn", dropout_rate=0.30, conv_filters=256),
    "desk_cnn": LocatorConfig("cnn", dropout_rate=0.30, conv_filters=16),
}


@dataclass(frozen=True)
class TargetStandardizer:
    mean_lat: float
    mean_lon: float
    std_lat: float
    std_lon: float

    def __post_init__(self):
        if not (self.std_lat > 0 and self.std_lon > 0):
            raise DegenerateTargets("standardizer needs positive spreads")

    @classmethod
    def fit(cls, points) -> "TargetStandardizer":
        if len(points) == 0:
            raise EmptySplit("no training epicenters to fit")
        lat = np.array([p.lat for p in points])
        lon = np.array([p.lon for p in points])
        sl, so = float(lat.std()), float(lon.std())
        if not (sl > 0 and so > 0):
            raise DegenerateTargets("training epicenters have zero spread")
        return cls(float(lat.mean()), float(lon.mean()), sl, so)

    def standardize(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        return np.stack([(lat - self.mean_lat) / self.std_lat, (lon - self.mean_lon) / self.std_lon], axis=-1)

    def destandardize(self, y) -> tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y, dtype=float)
        return self.mean_lat + y[..., 0] * self.std_lat, self.mean_lon + y[..., 1] * self.std_lon

    def to_dict(self) -> dict:
        return asdict(self)


def _fc_widths(cfg: LocatorConfig) -> list[int]:
    d = cfg.lstm_dim
    return [d] * cfg.fc_layers + [2]


def _in_channels(cfg: LocatorConfig) -> int:
    return N_STATIONS if cfg.input_mode == "concat3" else 1


def _lstm_input_dim(cfg: LocatorConfig) -> int:
    return N_STATIONS * N_FEATURES if cfg.input_mode == "concat3" else N_FEATURES


def build_network(cfg: LocatorConfig, seed: int) -> Network:
    cfg.validate()
    rng = np.random.default_rng(seed)
    if cfg.model_kind == "lstm":
        stack = []
        d_in = _lstm_input_dim(cfg)
        for _ in range(cfg.lstm_layers):
            stack.append(LstmLayerParams.init(rng, d_in, cfg.lstm_dim, bias=cfg.bias_mode))
            d_in = cfg.lstm_dim
        fc = FcParams.init(rng, _fc_widths(cfg))
        return LstmRegressor(stack, fc, cfg.dropout_rate)
    conv = conv_stack(rng, _in_channels(cfg), [cfg.conv_filters] * cfg.conv_layers)
    flat = cfg.conv_filters * N_FRAMES * N_FEATURES
    fc = FcParams.init(rng, [flat, cfg.cnn_hidden, cfg.cnn_hidden, 2])
    return CnnRegressor(conv, fc, cfg.dropout_rate)


def lstm_param_count(d_in: int, d: int, layers: int, fc_layers: int, bias: bool = False) -> int:
    """Closed-form parameter count of the LSTM locator."""
    per_gate_bias = d if bias else 0
    first = 4 * (d * d_in + d * d + per_gate_bias)
    deeper = (layers - 1) * 4 * (d * d + d * d + per_gate_bias)
    fc = (fc_layers - 1) * (d * d + d) + (2 * d + 2)
    return first + deeper + fc


def assemble_input(features, mode: str = "concat3", kind: str = "lstm") -> np.ndarray:
    """Network input for one event from its three normalized station matrices.

    concat3: (39, 93) sequence for the LSTM, (3, 39, 31) image for the CNN.
    per_station_ensemble: a batch of three single-station inputs,
    (3, 39, 31) for the LSTM or (3, 1, 39, 31) for the CNN.
    """
    if len(features) != N_STATIONS:
        raise BadInput(f"need exactly {N_STATIONS} station matrices, got {len(features)}")
    mats = []
    for m in features:
        if not isinstance(m, FeatureMatrix) or not m.normalized:
            raise BadInput("station features must be normalized FeatureMatrix objects")
        if m.values.shape != (N_FRAMES, N_FEATURES):
            raise BadInput(f"feature matrix must be {N_FRAMES}x{N_FEATURES}")
        mats.append(m.values)
    if mode == "concat3":
        return np.concatenate(mats, axis=1) if kind == "lstm" else np.stack(mats)
    if mode == "per_station_ensemble":
        stacked = np.stack(mats)
        return stacked if kind == "lstm" else stacked[:, None]
    raise BadInput(f"unknown input mode {mode!r}")


def stack_inputs(values: np.ndarray, cfg: LocatorConfig) -> np.ndarray:
    """Batch network input from a raw (E, 3, 39, 31) array of normalized features.

    Ensemble mode flattens the station axis into the batch: row 3e + s is
    station s of event e.
    """
    values = np.asarray(values, dtype=float)
    E = values.shape[0]
    if values.shape[1:] != (N_STATIONS, N_FRAMES, N_FEATURES):
        raise ShapeMismatch(f"expected (E, 3, {N_FRAMES}, {N_FEATURES}) features, got {values.shape}")
    if cfg.input_mode == "concat3":
        if cfg.model_kind == "lstm":
            return values.transpose(0, 2, 1, 3).reshape(E, N_FRAMES, N_STATIONS * N_FEATURES)
        return values
    flat = values.reshape(E * N_STATIONS, N_FRAMES, N_FEATURES)
    return flat if cfg.model_kind == "lstm" else flat[:, None]


class Locator:
    def __init__(self, cfg: LocatorConfig, net: Network, standardizer: TargetStandardizer | None = None,
                 seed: int = 0, normalization: dict | None = None):
        self.cfg = cfg
        self.net = net
        self.standardizer = standardizer
        self.seed = seed
        self.normalization = normalization or {"mode": "per_signal"}

    def predict_standardized(self, values: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """(E, 2) standardized outputs; ensemble mode averages the station outputs."""
        x = stack_inputs(values, self.cfg)
        out = []
        for k in range(0, x.shape[0], batch_size):
            out.append(self.net.predict(x[k : k + batch_size]))
        y = np.concatenate(out, axis=0)
        return y

    def predict(self, values: np.ndarray, batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
        """Latitude and longitude arrays for a batch of (E, 3, 39, 31) features."""
        if self.standardizer is None:
            raise BadConfig("locator has no fitted target standardizer")
        y = self.predict_standardized(values, batch_size)
        lat, lon = self.standardizer.destandardize(y)
        if self.cfg.input_mode == "per_station_ensemble":
            lat = lat.reshape(-1, N_STATIONS).mean(axis=1)
            lon = lon.reshape(-1, N_STATIONS).mean(axis=1)
        return lat, lon

    def header(self) -> dict:
        return {
            "architecture": self.cfg.to_dict(),
            "bias_mode": self.cfg.bias_mode,
            "dimensions": {"frames": N_FRAMES, "features": N_FEATURES, "stations": N_STATIONS},
            "init": INIT_RULE,
            "normalization": self.normalization,
            "seed": self.seed,
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
        }

    def to_bytes(self) -> bytes:
        return dumps_vloc(self.header(), self.net.named_arrays())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Locator":
        header, arrays = loads_vloc(data)
        cfg = LocatorConfig.from_dict(header["architecture"]).validate()
        net = build_network(cfg, header["seed"])
        if [n for n, _ in net.named_arrays()] != [n for n, _ in header["arrays"]]:
            raise BadConfig("checkpoint arrays do not match the declared architecture")
        net.load_state(arrays)
        std = TargetStandardizer(**header["standardizer"]) if header.get("standardizer") else None
        return cls(cfg, net, std, header["seed"], header.get("normalization"))

    @classmethod
    def load(cls, path) -> "Locator":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_locator(cfg: LocatorConfig, seed: int = 0, standardizer: TargetStandardizer | None = None) -> Locator:
    return Locator(cfg.validate(), build_network(cfg, seed), standardizer, seed)


def predict_epicenter(locator: Locator, features, std: TargetStandardizer | None = None) -> GeoPoint:
    """Epicenter of one event from its three normalized station matrices."""
    if std is not None and std is not locator.standardizer:
        locator = Locator(locator.cfg, locator.net, std, locator.seed, locator.normalization)
    # rejects missing, misshapen or unnormalized matrices before batching
    assemble_input(features, locator.cfg.input_mode, locator.cfg.model_kind)
    values = np.stack([m.values for m in features])[None]
    lat, lon = locator.predict(values)
    return GeoPoint(float(lat[0]), float(lon[0]))


def with_overrides(cfg: LocatorConfig, **kw) -> LocatorConfig:
    return replace(cfg, **kw).validate()
