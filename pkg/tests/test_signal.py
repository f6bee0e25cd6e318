import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from volcloc.errors import BadBand, BadLength, OutOfRange
from volcloc.signal import (
    HOP_SAMPLES,
    LOG_EPS,
    N_FEATURES,
    N_FRAMES,
    FeatureMatrix,
    Segment,
    Waveform,
    bandpass,
    dft64,
    extract_features,
    feature_stats,
    frame_segment,
    frame_starts,
    log_features,
    normalize_features,
    segment_event,
)


def naive_dft(x, n=64):
    """O(n^2) DFT oracle of a zero-padded real frame."""
    x = np.concatenate([np.asarray(x, dtype=float), np.zeros(n - len(x))])
    k = np.arange(n)
    out = []
    for m in range(n // 2 + 1):
        out.append(abs(sum(x[j] * complex(math.cos(2 * math.pi * m * j / n), -math.sin(2 * math.pi * m * j / n))
                           for j in k)))
    return np.array(out)


def wf(x, rate=100, t0=0.0):
    return Waveform(np.asarray(x, dtype=float), rate, "ST01", "EV00000", t0)


def test_waveform_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        wf([])
    with pytest.raises(ValueError):
        wf([0.0, np.nan])


def test_segment_ramp_indices():
    s = segment_event(wf(np.arange(1000)), 3.0)
    assert np.array_equal(s.samples, np.arange(100, 800, dtype=float))
    assert s.p_offset_s == 2.0
    assert len(s.samples) == 700


def test_segment_needs_context():
    with pytest.raises(OutOfRange):
        segment_event(wf(np.arange(1000)), 1.0)
    with pytest.raises(OutOfRange):
        segment_event(wf(np.arange(1000)), 5.5)


def test_segment_respects_t0():
    s = segment_event(wf(np.arange(1000), t0=10.0), 13.0)
    assert s.samples[0] == 100.0


def test_frame_tiling():
    starts = frame_starts()
    assert len(starts) == N_FRAMES == 39
    assert np.all(np.diff(starts) == HOP_SAMPLES)
    frames = frame_segment(Segment(np.arange(700, dtype=float)))
    assert frames.shape == (39, 50)
    assert np.array_equal(frames[0], np.arange(50))
    assert np.array_equal(frames[38], np.arange(646, 696))
    assert frames.max() == 695  # samples 696..699 unused


def test_frame_bad_length():
    with pytest.raises(BadLength):
        frame_segment(Segment(np.zeros(699)))


def test_dft_impulse_and_constant():
    imp = np.zeros(50)
    imp[0] = 1.0
    assert np.allclose(dft64(imp), 1.0, atol=1e-15)
    m = dft64(np.ones(50))
    assert m.shape == (33,)
    assert m[0] == pytest.approx(50.0, abs=1e-12)
    assert m[32] == pytest.approx(0.0, abs=1e-12)


def test_dft_matches_naive_oracle():
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(100, 50))
    got = dft64(frames)
    want = np.stack([naive_dft(f) for f in frames])
    assert np.max(np.abs(got - want)) < 1e-9


def test_parseval_full_spectrum():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=50)
        X = np.fft.fft(np.concatenate([x, np.zeros(14)]))
        # full spectrum from the half spectrum: bins 1..31 appear twice
        m = dft64(x)
        half = m[0] ** 2 + m[32] ** 2 + 2 * np.sum(m[1:32] ** 2)
        assert half / 64 == pytest.approx(np.sum(x**2), rel=1e-9)
        assert np.sum(np.abs(X) ** 2) / 64 == pytest.approx(np.sum(x**2), rel=1e-9)


def test_log_features_cases():
    assert np.allclose(log_features(np.ones(33)), math.log(1 + LOG_EPS))
    z = log_features(np.zeros(33))
    assert z.shape == (31,)
    assert z[0] == pytest.approx(-23.0259, abs=1e-4)


def test_extract_shapes_and_zero_segment():
    f = extract_features(Segment(np.zeros(700)))
    assert (f.T, f.N) == (39, 31)
    assert not f.normalized
    assert np.all(f.values == math.log(LOG_EPS))


def test_scaling_shifts_log_features():
    x = np.random.default_rng(2).normal(size=700)
    a = extract_features(Segment(x)).values
    b = extract_features(Segment(10 * x)).values
    assert np.allclose(b - a, math.log(10), atol=1e-6)


def test_extract_deterministic():
    x = np.random.default_rng(3).normal(size=700)
    a = extract_features(Segment(x)).values
    b = extract_features(Segment(x.copy())).values
    assert a.tobytes() == b.tobytes()


def test_normalize_toy_column():
    m = FeatureMatrix(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    n = normalize_features(m)
    assert np.allclose(n.values[:, 0], [-1.2247, 0, 1.2247], atol=1e-4)
    assert np.all(n.values[:, 1] == 0)
    assert n.normalized


def test_normalize_invariant_and_idempotent():
    x = np.random.default_rng(4).normal(size=700)
    n = normalize_features(extract_features(Segment(x)))
    assert np.all(np.abs(n.values.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(n.values.var(axis=0) - 1) < 1e-6)
    again = normalize_features(n)
    assert np.allclose(again.values, n.values, atol=1e-12)


def test_corpus_stats_mode():
    rng = np.random.default_rng(5)
    mats = [extract_features(Segment(rng.normal(size=700))) for _ in range(4)]
    mean, std = feature_stats(mats)
    pooled = np.concatenate([m.values for m in mats])
    assert np.allclose(mean, pooled.mean(axis=0))
    n = normalize_features(mats[0], (mean, std))
    assert np.allclose(n.values, (mats[0].values - mean) / std)


def test_bandpass_passband_and_stopband():
    t = np.arange(2000) / 100
    x = np.sin(2 * np.pi * 5 * t)
    y = bandpass(wf(x), 0.8, 10).samples
    assert len(y) == len(x)
    inner = slice(100, -100)
    amp = np.max(np.abs(y[inner]))
    assert abs(amp - 1) < 0.05
    drift = np.sin(2 * np.pi * 0.05 * np.arange(6000) / 100)
    yd = bandpass(wf(drift), 0.8, 10).samples
    assert np.sqrt(np.mean(yd**2)) < 0.1 * np.sqrt(np.mean(drift**2))


@pytest.mark.parametrize("lo,hi", [(10, 0.8), (0, 5), (1, 50), (1, 60)])
def test_bandpass_bad_band(lo, hi):
    with pytest.raises(BadBand):
        bandpass(wf(np.zeros(500)), lo, hi)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 700, elements=st.floats(-1e3, 1e3)))
def test_feature_shape_law(x):
    f = extract_features(Segment(x))
    assert f.values.shape == (N_FRAMES, N_FEATURES)
    assert np.all(np.isfinite(f.values))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 50, elements=st.floats(-1e3, 1e3)))
def test_dft_nonnegative_and_conjugate_symmetric(x):
    m = dft64(x)
    assert np.all(m >= 0)
    full = np.abs(np.fft.fft(np.concatenate([x, np.zeros(14)])))
    assert np.allclose(m[1:32], full[63:32:-1], atol=1e-9)
