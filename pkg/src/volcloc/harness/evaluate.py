"""Test-split evaluation of locators and simple reference predictors."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import EmptySplit
from ..geo import EvalReport, GeoPoint, build_report, errors_km, training_centroid
from ..locator import Locator
from .data import Prepared

# maps (E, 3, 39, 31) normalized features to (lat, lon) arrays
Predictor = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def report_from_predictions(lat, lon, test_epicenters: Sequence[GeoPoint], train_epicenters: Sequence[GeoPoint],
                            threshold_km: float = 1.0, ring_width_km: float = 0.5) -> EvalReport:
    if len(test_epicenters) == 0:
        raise EmptySplit("test split is empty")
    err = errors_km([p.lat for p in test_epicenters], [p.lon for p in test_epicenters], lat, lon)
    return build_report([float(e) for e in err], test_epicenters, train_epicenters, threshold_km, ring_width_km)


def evaluate(model: Locator | Predictor, test: Prepared, train_epicenters: Sequence[GeoPoint],
             threshold_km: float = 1.0, ring_width_km: float = 0.5) -> EvalReport:
    """Errors in km against the reference epicenters, summarised into an EvalReport.

    Ring analysis is centred on the training centroid.
    """
    if len(test.event_ids) == 0:
        raise EmptySplit("test split is empty")
    predict = model.predict if isinstance(model, Locator) else model
    lat, lon = predict(test.features)
    return report_from_predictions(lat, lon, test.epicenters, train_epicenters, threshold_km, ring_width_km)


def constant_predictor(point: GeoPoint) -> Predictor:
    def predict(features):
        n = len(features)
        return np.full(n, point.lat), np.full(n, point.lon)

    return predict


def centroid_predictor(train_epicenters: Sequence[GeoPoint]) -> Predictor:
    """Predicts the training centroid for every event."""
    return constant_predictor(training_centroid(train_epicenters))


def oracle_predictor(test: Prepared) -> Predictor:
    """Returns the reference epicenters of ``test``; a sanity check only."""
    lat = np.array([p.lat for p in test.epicenters])
    lon = np.array([p.lon for p in test.epicenters])
    return lambda features: (lat.copy(), lon.copy())
