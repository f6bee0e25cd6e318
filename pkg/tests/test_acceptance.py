"""Acceptance suite: one PASS/FAIL verdict line per top-level criterion.

The end-to-end runs are shared through module fixtures; the whole file takes
roughly ten to fifteen minutes on one CPU core.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import spearmanr

from volcloc.geo import ring_area, success_rate
from volcloc.harness import (
    SplitSpec,
    TrainConfig,
    build_dataset,
    centroid_predictor,
    evaluate,
    fit_and_evaluate,
    prepare_splits,
    run_pipeline,
)
from volcloc.locator import PRESETS, Locator, LocatorConfig, build_locator, stack_inputs, with_overrides
from volcloc.nnet import (
    ConvLayer,
    ConvOnly,
    ConvParams,
    FcOnly,
    FcParams,
    LstmLayerParams,
    LstmOnly,
    grad_check,
    lstm_cell_forward,
)
from volcloc.picker import locate_from_picks, pick, sp_distance, triangulate
from volcloc.signal import Waveform, dft64, extract_features, segment_event
from volcloc.synth import ScenarioConfig, gen_scenario, synth_waveform

pytestmark = pytest.mark.slow

# learning rate of the acceptance runs: the 8e-3 point of the tuning grid
ACCEPT_LR = 8e-3
E2E_EVENTS = 2000


def naive_dft(x, n=64):
    x = np.concatenate([np.asarray(x, dtype=float), np.zeros(n - len(x))])
    j = np.arange(n)
    return np.array([abs(np.sum(x * np.exp(-2j * np.pi * m * j / n))) for m in range(n // 2 + 1)])


# -------------------------------------------------------------- gradients


def _stack(seed, dims, bias=False):
    rng = np.random.default_rng(seed)
    return [LstmLayerParams.init(rng, a, b, bias=bias) for a, b in zip(dims[:-1], dims[1:])]


def _locator_case(cfg, seed):
    r = np.random.default_rng(100 + seed)
    x = stack_inputs(r.normal(size=(2, 3, 39, 31)), cfg)
    return build_locator(cfg, seed=seed).net, (x, r.normal(size=(2, 2)))


def grad_cases():
    r = np.random.default_rng
    yield "lstm 3->3", LstmOnly(_stack(0, [3, 3])), (r(0).normal(size=(2, 4, 3)), r(1).normal(size=(2, 3)) + 2), {}
    yield "lstm 2-4-3 bias", LstmOnly(_stack(1, [2, 4, 3], True)), \
        (r(2).normal(size=(3, 5, 2)), r(3).normal(size=(3, 3)) + 2), {}
    yield "lstm 3-3-3-2", LstmOnly(_stack(2, [3, 3, 3, 2])), \
        (r(4).normal(size=(2, 6, 3)), r(5).normal(size=(2, 2)) + 2), {}
    yield "fc 4-6-5-2", FcOnly(FcParams.init(r(6), [4, 6, 5, 2])), \
        (r(7).normal(size=(3, 4)), r(8).normal(size=(3, 2))), {}
    yield "fc dropout (training)", FcOnly(FcParams.init(r(9), [5, 8, 2]), 0.3), \
        (r(10).normal(size=(4, 5)), r(11).normal(size=(4, 2))), {"training": True}
    yield "conv 1->2", ConvOnly(ConvParams([ConvLayer.init(r(12), 1, 2)])), \
        (r(13).normal(size=(1, 1, 5, 5)), np.full((1, 50), 2.0)), {}
    yield "conv 2->3->2", ConvOnly(ConvParams([ConvLayer.init(r(14), 2, 3), ConvLayer.init(r(15), 3, 2)])), \
        (r(16).normal(size=(2, 2, 4, 6)), np.full((2, 48), 2.0)), {}
    net, batch = _locator_case(LocatorConfig("lstm", 1, 4, 2, 0.0), 0)
    yield "locator lstm", net, batch, {"max_coords": 300}
    net, batch = _locator_case(LocatorConfig("lstm", 2, 4, 1, 0.2, bias_mode=True), 1)
    yield "locator lstm bias+dropout", net, batch, {"max_coords": 300, "training": True}
    net, batch = _locator_case(LocatorConfig("cnn", dropout_rate=0.0, conv_filters=2, conv_layers=2, cnn_hidden=4), 2)
    yield "locator cnn", net, batch, {"max_coords": 300}
    net, batch = _locator_case(LocatorConfig("cnn", dropout_rate=0.3, conv_filters=2, conv_layers=1, cnn_hidden=3), 3)
    yield "locator cnn dropout", net, batch, {"max_coords": 300, "training": True}


def test_gradient_correctness(verdict):
    t0 = time.perf_counter()
    errs = {name: grad_check(net, batch, **kw) for name, net, batch, kw in grad_cases()}
    dt = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    ok = len(errs) >= 10 and errs[worst] < 1e-4 and dt < 120
    verdict("gradient correctness", ok,
            f"{len(errs)} configs, max rel err {errs[worst]:.2e} ({worst}), {dt:.1f} s (need < 1e-4, < 120 s)")
    assert ok


# -------------------------------------------------------------- LSTM cell


def test_lstm_cell_oracle(verdict):
    p = LstmLayerParams.init(np.random.default_rng(0), 1, 1)
    for n in p.names():
        getattr(p, n)[...] = 0.0
    h, c, _ = lstm_cell_forward(np.array([0.4]), np.array([0.1]), np.array([2.0]), p)
    hand = 0.5 * math.tanh(1.0)
    scalar_ok = abs(h[0] - hand) < 1e-12 and abs(c[0] - 1.0) < 1e-12 and abs(h[0] - 0.380797) < 1e-6

    pz = LstmLayerParams.init(np.random.default_rng(0), 3, 2)
    for n in pz.names():
        getattr(pz, n)[...] = 0.0
    hz, cz, _ = lstm_cell_forward(np.ones(3), np.zeros(2), np.zeros(2), pz)
    zero_ok = np.all(np.abs(hz) < 1e-12) and np.all(np.abs(cz) < 1e-12)

    rng = np.random.default_rng(1)
    pr = LstmLayerParams.init(rng, 5, 4, bias=True)
    gates_ok = True
    for _ in range(1000):
        _, _, g = lstm_cell_forward(rng.normal(scale=3, size=5), rng.normal(size=4), rng.normal(size=4), pr)
        gates_ok &= all(np.all((g[k] > 0) & (g[k] < 1)) for k in ("i", "f", "o"))
        gates_ok &= bool(np.all(np.abs(g["g"]) < 1))
    ok = bool(scalar_ok and zero_ok and gates_ok)
    verdict("LSTM cell oracle", ok, f"h = {h[0]:.12f} vs 0.5*tanh(1) = {hand:.12f}; zero case {zero_ok}; "
            f"gate ranges on 1000 inputs {gates_ok}")
    assert ok


# ---------------------------------------------------------- feature law


def test_feature_shape_law(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    w = Waveform(rng.normal(size=2000), 100, "ST01", "EV00000", 0.0)
    f = extract_features(segment_event(w, 5.0))
    shape_ok = f.values.shape == (39, 31)
    frames = rng.normal(size=(100, 50))
    err = float(np.max(np.abs(dft64(frames) - np.stack([naive_dft(x) for x in frames]))))
    dt = time.perf_counter() - t0
    ok = shape_ok and err < 1e-9 and dt < 60
    verdict("feature shape law", ok, f"7 s @ 100 Hz -> {f.values.shape}; dft64 vs naive max err {err:.1e}; {dt:.1f} s")
    assert ok


# -------------------------------------------------------- triangulation


def test_triangulation_oracle(verdict):
    t0 = time.perf_counter()
    cfg = ScenarioConfig(n_events=200, noise_sigma=0.0, seed=21)
    sc = gen_scenario(cfg)
    xy = [(s.x_km, s.y_km) for s in sc.stations]
    worst = 0.0
    for ev in sc.events:
        d = [sp_distance(ev.arrivals[s.station_id].t_s - ev.arrivals[s.station_id].t_p, cfg.velocity)
             for s in sc.stations]
        r = triangulate(xy, d)
        worst = max(worst, math.hypot(r.x - ev.x_km, r.y - ev.y_km))

    ncfg = ScenarioConfig(n_events=200, snr_range=(10.0, 20.0), seed=21)
    nsc = gen_scenario(ncfg)
    sxy = {s.station_id: (s.x_km, s.y_km) for s in nsc.stations}
    errs = []
    for ev in nsc.events:
        picks = {sid: pick(synth_waveform(ev, sid, ncfg)[0]) for sid in sxy}
        loc = locate_from_picks(picks, sxy, ncfg.velocity)
        errs.append(math.hypot(loc.x - ev.x_km, loc.y - ev.y_km))
    med = float(np.median(errs))
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and med < 0.5 and dt < 120
    verdict("triangulation oracle", ok,
            f"noiseless max error {worst:.2e} km (< 1e-6); STA/LTA SNR 10-20 median {med:.3f} km (< 0.5); {dt:.0f} s")
    assert ok


# ------------------------------------------------------------ end to end


def _scenario(snr):
    return ScenarioConfig(n_events=E2E_EVENTS, density_profile="centrally_peaked", snr_range=snr, seed=0)


def _train_cfg(**kw):
    return TrainConfig(learning_rate=ACCEPT_LR, max_epochs=200, patience=20, seed=0, **kw)


@pytest.fixture(scope="module")
def e2e():
    t0 = time.perf_counter()
    sc = gen_scenario(_scenario((5.0, 20.0)))
    data = prepare_splits(build_dataset(sc), SplitSpec(seed=0))
    res = fit_and_evaluate(data, PRESETS["desk_lstm"], _train_cfg(), model_seed=0)
    return res, time.perf_counter() - t0


def test_e2e_validation_improves(e2e, verdict):
    res, dt = e2e
    h = res.history
    first, best = h.val_mae_km[0], h.best_val_mae_km
    gain = 1 - best / first
    ok = gain >= 0.5
    verdict("end-to-end (a) validation MAE gain", ok,
            f"epoch 1 {first:.3f} km -> best {best:.3f} km at epoch {h.best_epoch + 1}: {gain:.1%} (need >= 50%); "
            f"{len(h.val_mae_km)} epochs, {dt / 60:.1f} min")
    assert ok


def test_e2e_success_beats_centroid(e2e, verdict):
    res, _ = e2e
    data = res.data
    cen = evaluate(centroid_predictor(data.train.epicenters), data.test, data.train.epicenters)
    ok = res.report.success_rate >= 0.40 and res.report.success_rate > cen.success_rate
    verdict("end-to-end (b) test success", ok,
            f"LSTM {res.report.success_rate:.3f} (need >= 0.40), centroid {cen.success_rate:.3f}, "
            f"MAE {res.report.mae_km:.3f} km over {res.report.n_events} events")
    assert ok


def _picker_baseline(sc, test_ids):
    """STA/LTA picks at every station, then triangulation; unlocated events score as misses."""
    cfg = sc.cfg
    sxy = {s.station_id: (s.x_km, s.y_km) for s in sc.stations}
    located_errs, fallback_errs = [], []
    for eid in test_ids:
        ev = sc.event(eid)
        picks = {sid: pick(synth_waveform(ev, sid, cfg)[0]) for sid in sxy}
        loc = locate_from_picks(picks, sxy, cfg.velocity)
        e = math.hypot(loc.x - ev.x_km, loc.y - ev.y_km)
        fallback_errs.append(e)
        located_errs.append(e if loc.located else math.inf)
    return located_errs, fallback_errs


def test_e2e_high_noise_vs_picker(verdict):
    t0 = time.perf_counter()
    sc = gen_scenario(_scenario((1.0, 3.0)))
    data = prepare_splits(build_dataset(sc), SplitSpec(seed=0))
    res = fit_and_evaluate(data, PRESETS["desk_lstm"], _train_cfg(), model_seed=0)
    located, fallback = _picker_baseline(sc, data.splits.test)
    base = success_rate(located)
    n_loc = sum(math.isfinite(e) for e in located)
    lstm = res.report.success_rate
    ok = lstm >= base
    verdict("end-to-end (c) SNR 1-3 LSTM vs picker", ok,
            f"LSTM {lstm:.3f} vs STA/LTA+triangulation {base:.3f} ({n_loc}/{len(located)} located); "
            f"with station-centroid fallback the baseline scores {success_rate(fallback):.3f}; "
            f"{time.perf_counter() - t0:.0f} s")
    assert ok


# --------------------------------------------------------------- CNN


CNN_EPOCHS = 3


def test_desk_cnn_report(e2e, verdict):
    res, _ = e2e
    t0 = time.perf_counter()
    cnn = fit_and_evaluate(res.data, PRESETS["desk_cnn"],
                           TrainConfig(learning_rate=8e-4, dropout=None, max_epochs=CNN_EPOCHS,
                                       patience=CNN_EPOCHS, seed=0), model_seed=0)
    rep = cnn.report
    valid = (rep.n_events == len(res.data.test.event_ids) and math.isfinite(rep.mae_km)
             and 0 <= rep.success_rate <= 1 and rep.cumulative_curve[-1][1] == 1.0
             and abs(sum(r.train_fraction for r in rep.ring_stats) - 1) < 1e-12)
    verdict("desk CNN EvalReport", valid,
            f"{CNN_EPOCHS} epochs, MAE {rep.mae_km:.3f} km, success {rep.success_rate:.3f}, "
            f"{len(rep.ring_stats)} rings; {time.perf_counter() - t0:.0f} s")
    assert valid


# ----------------------------------------------------------- analytics


def test_analytics_arithmetic(e2e, verdict):
    a1, a2 = ring_area(0, 2.5), ring_area(2.5, 5.5)
    areas_ok = abs(a1 - 19.6) <= 0.05 and abs(a2 - 75.5) <= 0.15
    res, _ = e2e
    pairs = [(r.train_density_per_km2, r.test_success_rate) for r in res.report.ring_stats if r.n_test > 0]
    rho = float(spearmanr([p[0] for p in pairs], [p[1] for p in pairs])[0]) if len(pairs) > 2 else math.nan
    if not rho >= 0:
        warnings.warn(f"density/success rank correlation is {rho:.3f} (< 0)")
    verdict("analytics arithmetic", areas_ok,
            f"areas {a1:.3f} / {a2:.3f} km^2 vs 19.6 / 75.5; {len(pairs)} density-success pairs, "
            f"Spearman rho {rho:.3f}" + ("" if rho >= 0 else " (soft check warned)"))
    assert areas_ok and len(pairs) >= 2


# --------------------------------------------------- determinism, files


def test_determinism_and_persistence(e2e, verdict, tmp_path):
    small = ScenarioConfig(n_events=120, density_profile="centrally_peaked", seed=5)
    cfg = with_overrides(PRESETS["desk_lstm"], lstm_layers=1, lstm_dim=32)
    tc = TrainConfig(learning_rate=ACCEPT_LR, max_epochs=4, patience=4, seed=3)
    a = run_pipeline(small, cfg, tc, SplitSpec(seed=2), model_seed=1)
    b = run_pipeline(small, cfg, tc, SplitSpec(seed=2), model_seed=1)
    same = (a.locator.to_bytes() == b.locator.to_bytes() and a.report.to_dict() == b.report.to_dict()
            and a.history.to_csv() == b.history.to_csv())

    res, _ = e2e
    path = tmp_path / "e2e.vloc"
    res.locator.save(path)
    back = Locator.load(path)
    rep = evaluate(back, res.data.test, res.data.train.epicenters)
    lat0, lon0 = res.locator.predict(res.data.test.features)
    lat1, lon1 = back.predict(res.data.test.features)
    persisted = (rep.to_dict() == res.report.to_dict() and lat0.tobytes() == lat1.tobytes()
                 and lon0.tobytes() == lon1.tobytes() and back.to_bytes() == res.locator.to_bytes())
    ok = same and persisted
    verdict("determinism and persistence", ok,
            f"identical reruns {same}; checkpoint round-trip bitwise {persisted}")
    assert ok
