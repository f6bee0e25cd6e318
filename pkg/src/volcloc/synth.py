"""Synthetic volcano-tectonic event scenes with exact ground truth.

Stations and epicenters live in a local km frame around a region centre.
Each record is Gaussian noise plus a P Ricker wavelet at the P arrival and a
lower-frequency, twice-as-strong S Ricker wavelet at the S arrival, both
decaying as 1/distance.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import BadConfig
from .geo import GeoPoint, LocalFrame
from .picker import VelocityModel
from .signal import SAMPLE_RATE_HZ, Waveform

DEFAULT_CENTER = GeoPoint(-36.86, -71.38)


@dataclass
class ScenarioConfig:
    n_stations: int = 13
    n_events: int = 200
    region_radius_km: float = 6.0
    density_profile: str = "uniform"  # uniform | centrally_peaked
    central_radius_km: float = 2.5
    central_fraction: float = 0.40
    noise_sigma: float = 1.0
    snr_range: tuple[float, float] = (5.0, 20.0)
    v_p: float = 5.5
    v_s: float = 5.5 / math.sqrt(3.0)
    seed: int = 0
    center_lat: float = DEFAULT_CENTER.lat
    center_lon: float = DEFAULT_CENTER.lon
    min_station_spacing_km: float = 1.0
    sample_rate_hz: int = SAMPLE_RATE_HZ
    record_s: float = 20.0
    origin_time_s: float = 6.0
    p_freq_hz: float = 8.0
    s_freq_hz: float = 4.0
    s_amplitude_ratio: float = 2.0
    amplitude_floor_km: float = 0.5

    def __post_init__(self):
        self.snr_range = tuple(float(v) for v in self.snr_range)
        if self.n_stations < 3:
            raise BadConfig("n_stations must be >= 3")
        if self.n_events < 1:
            raise BadConfig("n_events must be >= 1")
        if self.region_radius_km <= 0 or self.central_radius_km <= 0:
            raise BadConfig("radii must be positive")
        if self.density_profile not in ("uniform", "centrally_peaked"):
            raise BadConfig(f"unknown density profile {self.density_profile!r}")
        lo, hi = self.snr_range
        if not 0 < lo <= hi:
            raise BadConfig("snr_range must satisfy 0 < lo <= hi")
        if self.noise_sigma < 0:
            raise BadConfig("noise_sigma must be >= 0")
        try:
            VelocityModel(self.v_p, self.v_s)
        except ValueError as exc:
            raise BadConfig(str(exc)) from exc
        if not 0 < self.central_fraction < 1:
            raise BadConfig("central_fraction must lie in (0, 1)")

    @property
    def velocity(self) -> VelocityModel:
        return VelocityModel(self.v_p, self.v_s)

    @property
    def frame(self) -> LocalFrame:
        return LocalFrame(GeoPoint(self.center_lat, self.center_lon))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_range"] = list(self.snr_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise BadConfig(f"unknown scenario keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class Station:
    station_id: str
    x_km: float
    y_km: float
    location: GeoPoint


@dataclass
class Arrival:
    station_id: str
    distance_km: float
    t_p: float
    t_s: float
    wfm_path: str = ""


@dataclass
class EventRecord:
    event_id: str
    true_epicenter: GeoPoint
    x_km: float
    y_km: float
    snr: float
    arrivals: dict[str, Arrival] = field(default_factory=dict)


@dataclass
class Scenario:
    cfg: ScenarioConfig
    stations: list[Station]
    events: list[EventRecord]
    observing: tuple[str, ...]

    def station(self, station_id: str) -> Station:
        for s in self.stations:
            if s.station_id == station_id:
                return s
        raise KeyError(station_id)

    def event(self, event_id: str) -> EventRecord:
        for e in self.events:
            if e.event_id == event_id:
                return e
        raise KeyError(event_id)


def ricker(t: np.ndarray, freq_hz: float) -> np.ndarray:
    """Unit-peak Ricker wavelet centred on t = 0."""
    a = (math.pi * freq_hz * np.asarray(t, dtype=float)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def _central_scale(cfg: ScenarioConfig) -> float:
    """Rayleigh scale giving ``central_fraction`` of events inside ``central_radius_km``
    once the radius is truncated to the region."""
    rc, rr = cfg.central_radius_km, cfg.region_radius_km

    def frac(s):
        return (1 - math.exp(-rc * rc / (2 * s * s))) / (1 - math.exp(-rr * rr / (2 * s * s)))

    lo, hi = 1e-3 * rr, 1e3 * rr
    if not frac(hi) < cfg.central_fraction < frac(lo):
        raise BadConfig("central_fraction is unreachable for these radii")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if frac(mid) > cfg.central_fraction:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _sample_radii(rng: np.random.Generator, cfg: ScenarioConfig, n: int) -> np.ndarray:
    rr = cfg.region_radius_km
    if cfg.density_profile == "uniform":
        return rr * np.sqrt(rng.random(n))
    s = _central_scale(cfg)
    # inverse CDF of a Rayleigh distribution truncated at the region radius
    top = 1.0 - math.exp(-rr * rr / (2 * s * s))
    u = rng.random(n) * top
    return s * np.sqrt(-2.0 * np.log1p(-u))


def _place_stations(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    pts: list[tuple[float, float]] = []
    for _ in range(100000):
        if len(pts) == cfg.n_stations:
            break
        r = cfg.region_radius_km * math.sqrt(rng.random())
        th = 2 * math.pi * rng.random()
        cand = (r * math.cos(th), r * math.sin(th))
        if all(math.hypot(cand[0] - p[0], cand[1] - p[1]) >= cfg.min_station_spacing_km for p in pts):
            pts.append(cand)
    if len(pts) < cfg.n_stations:
        raise BadConfig("cannot place stations with the requested spacing")
    return np.array(pts)


def _triangle_contains(a, b, c, p=(0.0, 0.0)) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    s1, s2, s3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    return (s1 >= 0 and s2 >= 0 and s3 >= 0) or (s1 <= 0 and s2 <= 0 and s3 <= 0)


def choose_observing(xy: np.ndarray) -> tuple[int, int, int]:
    """Pick the fixed observing triple.

    Among triangles enclosing the region centre, the one with the largest
    inradius (wide aperture, no slivers); the nearest three if none encloses it.
    """
    best, best_r = None, -1.0
    for tri in itertools.combinations(range(len(xy)), 3):
        a, b, c = (xy[i] for i in tri)
        if not _triangle_contains(a, b, c):
            continue
        area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        perim = math.dist(a, b) + math.dist(b, c) + math.dist(c, a)
        inradius = 2.0 * area / perim
        if inradius > best_r + 1e-12:
            best, best_r = tri, inradius
    if best is None:
        best = tuple(int(i) for i in np.argsort(np.hypot(xy[:, 0], xy[:, 1]))[:3])
    return tuple(sorted(int(i) for i in best))


def gen_scenario(cfg: ScenarioConfig) -> Scenario:
    rng = np.random.default_rng(cfg.seed)
    frame = cfg.frame
    xy = _place_stations(rng, cfg)
    lat, lon = frame.from_local(xy[:, 0], xy[:, 1])
    stations = [
        Station(f"ST{i + 1:02d}", float(xy[i, 0]), float(xy[i, 1]), GeoPoint(float(lat[i]), float(lon[i])))
        for i in range(cfg.n_stations)
    ]
    observing = tuple(stations[i].station_id for i in choose_observing(xy))

    radii = _sample_radii(rng, cfg, cfg.n_events)
    theta = 2 * math.pi * rng.random(cfg.n_events)
    ex, ey = radii * np.cos(theta), radii * np.sin(theta)
    elat, elon = frame.from_local(ex, ey)
    snr = rng.uniform(cfg.snr_range[0], cfg.snr_range[1], cfg.n_events)

    vm = cfg.velocity
    events = []
    for k in range(cfg.n_events):
        ev = EventRecord(
            event_id=f"EV{k:05d}",
            true_epicenter=GeoPoint(float(elat[k]), float(elon[k])),
            x_km=float(ex[k]),
            y_km=float(ey[k]),
            snr=float(snr[k]),
        )
        for s in stations:
            d = math.hypot(ev.x_km - s.x_km, ev.y_km - s.y_km)
            t_p = cfg.origin_time_s + d / vm.v_p
            t_s = t_p + d * vm.sp_slowness
            ev.arrivals[s.station_id] = Arrival(s.station_id, d, t_p, t_s)
        events.append(ev)
    return Scenario(cfg, stations, events, observing)


def record_seed(scenario_seed: int, event_id: str, station_id: str) -> np.random.SeedSequence:
    key = (zlib.crc32(event_id.encode()), zlib.crc32(station_id.encode()))
    return np.random.SeedSequence(entropy=scenario_seed, spawn_key=key)


def synth_waveform(event: EventRecord, station_id: str, cfg: ScenarioConfig) -> tuple[Waveform, float, float]:
    """Render one station record; returns (waveform, true t_p, true t_s)."""
    arr = event.arrivals[station_id]
    rate = cfg.sample_rate_hz
    n = int(round(cfg.record_s * rate))
    t = np.arange(n) / rate
    amp_ref = event.snr * cfg.noise_sigma if cfg.noise_sigma > 0 else event.snr
    amp = amp_ref / max(arr.distance_km, cfg.amplitude_floor_km)
    x = amp * ricker(t - arr.t_p, cfg.p_freq_hz)
    x += cfg.s_amplitude_ratio * amp * ricker(t - arr.t_s, cfg.s_freq_hz)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(record_seed(cfg.seed, event.event_id, station_id))
        x += rng.normal(0.0, cfg.noise_sigma, n)
    w = Waveform(x, rate, station_id, event.event_id, 0.0)
    return w, arr.t_p, arr.t_s
