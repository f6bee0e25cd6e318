"""Waveform segmentation, log-spectral feature extraction and band-pass filtering.

A 7 s segment at 100 Hz (700 samples, P arrival at 2 s) is cut into 39
overlapping 50-sample frames with a 17-sample hop. Each frame is zero-padded
to 64 samples, transformed, and the magnitudes of bins 2..32 are log
compressed, giving a 39x31 matrix per station.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _sps

from .errors import BadBand, BadLength, OutOfRange

SAMPLE_RATE_HZ = 100
PRE_P_S = 2.0
POST_P_S = 5.0
SEGMENT_SAMPLES = 700
FRAME_SAMPLES = 50
HOP_SAMPLES = 17
NFFT = 64
N_FRAMES = 39
N_BINS = NFFT // 2 + 1
N_DROPPED_BINS = 2
N_FEATURES = N_BINS - N_DROPPED_BINS
LOG_EPS = 1e-10
STD_FLOOR = 1e-12


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    station_id: str = ""
    event_id: str = ""
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def end_time(self) -> float:
        return self.t0 + self.duration_s

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate_hz


@dataclass
class Segment:
    samples: np.ndarray
    p_offset_s: float = PRE_P_S


@dataclass
class FeatureMatrix:
    values: np.ndarray
    normalized: bool = False

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]


def segment_event(w: Waveform, t_p: float) -> Segment:
    """Cut the 7 s window that starts 2 s before the P arrival."""
    rate = w.sample_rate_hz
    n = int(round((PRE_P_S + POST_P_S) * rate))
    start = int(round((t_p - PRE_P_S - w.t0) * rate))
    if start < 0 or start + n > w.samples.size:
        raise OutOfRange(
            f"7 s window around t_p={t_p:.3f} s is outside record "
            f"[{w.t0:.3f}, {w.end_time:.3f}] s"
        )
    return Segment(w.samples[start : start + n].copy(), PRE_P_S)


def frame_starts() -> np.ndarray:
    return np.arange(N_FRAMES) * HOP_SAMPLES


def frame_segment(s: Segment) -> np.ndarray:
    """Return a (39, 50) array whose row k holds samples [17k, 17k + 50)."""
    x = np.asarray(s.samples, dtype=np.float64)
    if x.shape != (SEGMENT_SAMPLES,):
        raise BadLength(f"segment must hold {SEGMENT_SAMPLES} samples, got {x.shape}")
    idx = frame_starts()[:, None] + np.arange(FRAME_SAMPLES)[None, :]
    return x[idx]


def dft64(frame: np.ndarray) -> np.ndarray:
    """Magnitudes of the non-negative-frequency bins of the zero-padded 64-point DFT.

    Accepts a single frame or a stack of frames along the last axis.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] != FRAME_SAMPLES:
        raise BadLength(f"frame must hold {FRAME_SAMPLES} samples")
    return np.abs(np.fft.rfft(frame, n=NFFT, axis=-1))


def log_features(mags: np.ndarray) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.float64)
    return np.log(mags[..., N_DROPPED_BINS:] + LOG_EPS)


def extract_features(s: Segment) -> FeatureMatrix:
    return FeatureMatrix(log_features(dft64(frame_segment(s))), normalized=False)


def feature_stats(matrices) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std pooled over every frame of ``matrices``.

    Used for corpus-level normalization; pass training-split matrices only.
    """
    stacked = np.concatenate([np.asarray(getattr(m, "values", m)) for m in matrices], axis=0)
    return stacked.mean(axis=0), stacked.std(axis=0)


def normalize_features(m: FeatureMatrix, stats=None) -> FeatureMatrix:
    """Mean/variance normalize each feature trajectory.

    With ``stats=None`` the statistics come from the matrix itself (per-signal
    mode). Otherwise ``stats`` is a (mean, std) pair from ``feature_stats``.
    Columns whose std falls below 1e-12 become zeros.
    """
    v = np.asarray(m.values, dtype=np.float64)
    if stats is None:
        mean = v.mean(axis=0)
        std = v.std(axis=0)
    else:
        mean, std = (np.asarray(a, dtype=np.float64) for a in stats)
    flat = std < STD_FLOOR
    safe = np.where(flat, 1.0, std)
    out = (v - mean) / safe
    out[:, flat] = 0.0
    return FeatureMatrix(out, normalized=True)


def event_features(w: Waveform, t_p: float, stats=None) -> FeatureMatrix:
    """Segment, extract and normalize in one call."""
    return normalize_features(extract_features(segment_event(w, t_p)), stats)


def bandpass(w: Waveform, lo_hz: float, hi_hz: float, order: int = 4) -> Waveform:
    """Zero-phase Butterworth band-pass (forward-backward second-order sections)."""
    nyq = w.sample_rate_hz / 2.0
    if not (0.0 < lo_hz < hi_hz < nyq) or not all(map(math.isfinite, (lo_hz, hi_hz))):
        raise BadBand(f"need 0 < lo < hi < {nyq} Hz, got lo={lo_hz}, hi={hi_hz}")
    sos = _sps.butter(order, [lo_hz, hi_hz], btype="bandpass", fs=w.sample_rate_hz, output="sos")
    # a long even extension keeps the start-up transients of the 0.8 Hz corner
    # out of the record; odd padding leaves spikes that fake STA/LTA onsets
    padlen = min(len(w.samples) - 1, int(3 * w.sample_rate_hz))
    y = _sps.sosfiltfilt(sos, w.samples, padtype="even", padlen=padlen)
    return Waveform(y, w.sample_rate_hz, w.station_id, w.event_id, w.t0)
