"""File formats: ``.wfm`` waveforms, the ``FEA1`` feature store and the CSV tables."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError
from .signal import N_FEATURES, N_FRAMES

WFM_MAGIC = b"WVF1"
FEA_MAGIC = b"FEA1"

CATALOG_COLUMNS = [
    "event_id",
    "station_id",
    "station_lat_deg",
    "station_lon_deg",
    "wfm_path",
    "true_t_p_s",
    "true_t_s_s",
    "true_lat_deg",
    "true_lon_deg",
]
STATION_COLUMNS = ["station_id", "lat_deg", "lon_deg", "observing"]
PICK_COLUMNS = ["event_id", "station_id", "t_p_s", "t_s_s", "p_quality", "s_quality"]
LOCATION_COLUMNS = ["event_id", "est_lat", "est_lon", "rms_residual_km", "n_stations"]


def write_wfm(path, samples: np.ndarray, sample_rate_hz: int) -> None:
    x = np.ascontiguousarray(samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(WFM_MAGIC)
        fh.write(struct.pack("<IQ", int(sample_rate_hz), x.size))
        fh.write(x.tobytes())


def read_wfm(path) -> tuple[int, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != WFM_MAGIC:
        raise FormatError(f"{path}: not a .wfm file")
    rate, n = struct.unpack_from("<IQ", data, 4)
    if len(data) != 16 + 8 * n:
        raise FormatError(f"{path}: expected {n} samples, file size disagrees")
    return rate, np.frombuffer(data, dtype="<f8", count=n, offset=16).astype(np.float64)


def write_feature_store(path, records: Iterable[tuple[str, list[np.ndarray]]]) -> None:
    """One record per event: magic, uint32 id length, id bytes, uint32 station
    count, then each 39x31 matrix as row-major little-endian float64."""
    with open(path, "wb") as fh:
        for event_id, mats in records:
            eid = event_id.encode("utf-8")
            fh.write(FEA_MAGIC)
            fh.write(struct.pack("<I", len(eid)))
            fh.write(eid)
            fh.write(struct.pack("<I", len(mats)))
            for m in mats:
                m = np.asarray(m, dtype="<f8")
                if m.shape != (N_FRAMES, N_FEATURES):
                    raise FormatError(f"feature matrix for {event_id} has shape {m.shape}")
                fh.write(np.ascontiguousarray(m).tobytes())


def iter_feature_store(path) -> Iterator[tuple[str, list[np.ndarray]]]:
    data = Path(path).read_bytes()
    off = 0
    size = N_FRAMES * N_FEATURES * 8
    while off < len(data):
        if data[off : off + 4] != FEA_MAGIC:
            raise FormatError(f"{path}: bad record magic at byte {off}")
        (n_id,) = struct.unpack_from("<I", data, off + 4)
        off += 8
        event_id = data[off : off + n_id].decode("utf-8")
        off += n_id
        (n_st,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + n_st * size > len(data):
            raise FormatError(f"{path}: truncated record {event_id}")
        mats = []
        for _ in range(n_st):
            mats.append(np.frombuffer(data, "<f8", N_FRAMES * N_FEATURES, off).reshape(N_FRAMES, N_FEATURES).copy())
            off += size
        yield event_id, mats


def read_feature_store(path) -> dict[str, list[np.ndarray]]:
    return dict(iter_feature_store(path))


def write_csv(path, columns: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in columns})


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def parse_float(s: str) -> float | None:
    return None if s in ("", None) else float(s)
