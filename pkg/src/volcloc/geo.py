"""Local-scale coordinates, location error metrics and evaluation analytics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyList, OutOfFrame

EARTH_RADIUS_KM = 6371.0
FRAME_LIMIT_DEG = 1.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"coordinate out of range ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class LocalFrame:
    """Equirectangular tangent frame: x km east, y km north of ``origin``."""

    origin: GeoPoint
    earth_radius_km: float = EARTH_RADIUS_KM

    def _check(self, dlat, dlon):
        if np.any(np.abs(dlat) >= FRAME_LIMIT_DEG) or np.any(np.abs(dlon) >= FRAME_LIMIT_DEG):
            raise OutOfFrame(f"point is more than {FRAME_LIMIT_DEG} deg from frame origin")

    def to_local(self, lat, lon):
        """Vectorised forward projection of degree arrays to km."""
        dlat = np.asarray(lat, dtype=float) - self.origin.lat
        dlon = np.asarray(lon, dtype=float) - self.origin.lon
        self._check(dlat, dlon)
        coslat = math.cos(math.radians(self.origin.lat))
        x = self.earth_radius_km * np.radians(dlon) * coslat
        y = self.earth_radius_km * np.radians(dlat)
        return x, y

    def from_local(self, x, y):
        coslat = math.cos(math.radians(self.origin.lat))
        dlon = np.degrees(np.asarray(x, dtype=float) / (self.earth_radius_km * coslat))
        dlat = np.degrees(np.asarray(y, dtype=float) / self.earth_radius_km)
        self._check(dlat, dlon)
        return self.origin.lat + dlat, self.origin.lon + dlon


def to_local_km(frame: LocalFrame, p: GeoPoint) -> tuple[float, float]:
    x, y = frame.to_local(p.lat, p.lon)
    return float(x), float(y)


def from_local_km(frame: LocalFrame, x: float, y: float) -> GeoPoint:
    lat, lon = frame.from_local(x, y)
    return GeoPoint(float(lat), float(lon))


def error_km(a: GeoPoint, b: GeoPoint) -> float:
    """Distance from ``a`` to ``b`` in a local frame centred on ``a``."""
    x, y = to_local_km(LocalFrame(a), b)
    return math.hypot(x, y)


def errors_km(ref_lat, ref_lon, lat, lon) -> np.ndarray:
    """Vectorised ``error_km`` with each reference as frame origin.

    No frame-extent check, so wildly wrong predictions still yield a
    (large) distance instead of an error.
    """
    ref_lat = np.asarray(ref_lat, dtype=float)
    coslat = np.cos(np.radians(ref_lat))
    x = EARTH_RADIUS_KM * np.radians(np.asarray(lon, dtype=float) - np.asarray(ref_lon, dtype=float)) * coslat
    y = EARTH_RADIUS_KM * np.radians(np.asarray(lat, dtype=float) - ref_lat)
    return np.hypot(x, y)


def mean_absolute_error(errors: Sequence[float]) -> float:
    if len(errors) == 0:
        raise EmptyList("no errors given")
    return float(np.mean(np.asarray(errors, dtype=float)))


def success_rate(errors: Sequence[float], threshold: float = 1.0) -> float:
    """Fraction of errors strictly below ``threshold`` km."""
    if len(errors) == 0:
        raise EmptyList("no errors given")
    e = np.asarray(errors, dtype=float)
    return float(np.count_nonzero(e < threshold)) / e.size


def cumulative_curve(errors: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF, one (error, fraction <= error) point per distinct value."""
    if len(errors) == 0:
        raise EmptyList("no errors given")
    e = np.sort(np.asarray(errors, dtype=float))
    values, counts = np.unique(e, return_counts=True)
    cum = np.cumsum(counts)
    return [(float(v), float(c) / e.size) for v, c in zip(values, cum)]


def training_centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    if len(points) == 0:
        raise EmptyList("no training epicenters")
    lat = math.fsum(p.lat for p in points) / len(points)
    lon = math.fsum(p.lon for p in points) / len(points)
    return GeoPoint(lat, lon)


def ring_area(r_lo: float, r_hi: float) -> float:
    return math.pi * (r_hi**2 - r_lo**2)


@dataclass
class RingStat:
    r_lo_km: float
    r_hi_km: float
    n_train: int
    train_fraction: float
    train_density_per_km2: float
    n_test: int
    n_test_success: int
    # None when no test event falls inside the ring
    test_success_rate: float | None


@dataclass
class TestResult:
    epicenter: GeoPoint
    error_km: float


def ring_analysis(
    train_epicenters: Sequence[GeoPoint],
    test_results: Sequence[TestResult],
    ring_width_km: float = 0.5,
    threshold_km: float = 1.0,
) -> list[RingStat]:
    """Bucket training and test events into rings around the training centroid.

    Rings are [k*w, (k+1)*w) for k = 0..K where K is the outermost ring
    holding any training or test event.
    """
    if len(train_epicenters) == 0:
        raise EmptyList("no training epicenters")
    centroid = training_centroid(train_epicenters)
    train_k = [int(error_km(centroid, p) // ring_width_km) for p in train_epicenters]
    test_k = [int(error_km(centroid, t.epicenter) // ring_width_km) for t in test_results]
    n_rings = max(train_k + test_k) + 1

    n_train = np.bincount(train_k, minlength=n_rings)
    n_test = np.bincount(test_k, minlength=n_rings) if test_k else np.zeros(n_rings, int)
    hits = np.zeros(n_rings, int)
    for k, t in zip(test_k, test_results):
        if t.error_km < threshold_km:
            hits[k] += 1

    stats = []
    total = len(train_epicenters)
    for k in range(n_rings):
        r_lo, r_hi = k * ring_width_km, (k + 1) * ring_width_km
        stats.append(
            RingStat(
                r_lo_km=r_lo,
                r_hi_km=r_hi,
                n_train=int(n_train[k]),
                train_fraction=float(n_train[k]) / total,
                train_density_per_km2=float(n_train[k]) / ring_area(r_lo, r_hi),
                n_test=int(n_test[k]),
                n_test_success=int(hits[k]),
                test_success_rate=(float(hits[k]) / n_test[k]) if n_test[k] else None,
            )
        )
    return stats


def density_success_pairs(stats: Iterable[RingStat]) -> list[tuple[float, float]]:
    """(training density, test success rate) for rings holding both kinds of event."""
    return [
        (s.train_density_per_km2, s.test_success_rate)
        for s in stats
        if s.n_train > 0 and s.test_success_rate is not None
    ]


@dataclass
class EvalReport:
    mae_km: float
    success_rate: float
    cumulative_curve: list[tuple[float, float]]
    ring_stats: list[RingStat]
    n_events: int
    errors_km: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cumulative_curve"] = [list(p) for p in self.cumulative_curve]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            mae_km=d["mae_km"],
            success_rate=d["success_rate"],
            cumulative_curve=[tuple(p) for p in d["cumulative_curve"]],
            ring_stats=[RingStat(**r) for r in d["ring_stats"]],
            n_events=d["n_events"],
            errors_km=list(d.get("errors_km", [])),
        )


def build_report(
    errors: Sequence[float],
    test_epicenters: Sequence[GeoPoint],
    train_epicenters: Sequence[GeoPoint],
    threshold_km: float = 1.0,
    ring_width_km: float = 0.5,
) -> EvalReport:
    results = [TestResult(p, e) for p, e in zip(test_epicenters, errors)]
    return EvalReport(
        mae_km=mean_absolute_error(errors),
        success_rate=success_rate(errors, threshold_km),
        cumulative_curve=cumulative_curve(errors),
        ring_stats=ring_analysis(train_epicenters, results, ring_width_km, threshold_km),
        n_events=len(errors),
        errors_km=[float(e) for e in errors],
    )
