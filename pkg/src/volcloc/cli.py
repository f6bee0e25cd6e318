"""Command-line entry point: ``volcloc <command> ...``.

Configs are JSON files. Failures print one JSON line ``{"error": code,
"message": ...}`` to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import BadConfig, BadInput, VolcLocError
from .geo import EvalReport, GeoPoint, LocalFrame, density_success_pairs
from .harness import (
    Dataset,
    GridSpace,
    Normalizer,
    SplitSpec,
    Splits,
    TrainConfig,
    evaluate,
    fit_standardizer,
    grid_search,
    prepare,
    split_dataset,
    train,
)
from .harness.gridsearch import DEFAULT_BUDGET
from .locator import PRESETS, Locator, LocatorConfig, build_locator
from .picker import PickerConfig, PickResult, VelocityModel, locate_from_picks, pick
from .signal import Waveform, extract_features, segment_event
from .synth import ScenarioConfig, gen_scenario, synth_waveform


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"cannot read JSON file {path}: {exc}") from exc


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> None:
    d = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = ScenarioConfig.from_dict(d)
    sc = gen_scenario(cfg)
    out = _out_dir(args.out)
    _out_dir(out / "waveforms")
    _dump_json(out / "scenario.json", cfg.to_dict())
    io.write_csv(out / "stations.csv", io.STATION_COLUMNS, [
        {"station_id": s.station_id, "lat_deg": s.location.lat, "lon_deg": s.location.lon,
         "observing": s.station_id in sc.observing}
        for s in sc.stations
    ])
    rows = []
    for ev in sc.events:
        for s in sc.stations:
            w, t_p, t_s = synth_waveform(ev, s.station_id, cfg)
            rel = f"waveforms/{ev.event_id}_{s.station_id}.wfm"
            io.write_wfm(out / rel, w.samples, w.sample_rate_hz)
            rows.append({
                "event_id": ev.event_id, "station_id": s.station_id,
                "station_lat_deg": s.location.lat, "station_lon_deg": s.location.lon,
                "wfm_path": rel, "true_t_p_s": t_p, "true_t_s_s": t_s,
                "true_lat_deg": ev.true_epicenter.lat, "true_lon_deg": ev.true_epicenter.lon,
            })
    io.write_csv(out / "catalog.csv", io.CATALOG_COLUMNS, rows)
    print(f"wrote {len(sc.events)} events x {len(sc.stations)} stations to {out}")


# ------------------------------------------------------------- catalogs


class Catalog:
    def __init__(self, path):
        self.path = Path(path)
        self.root = self.path.parent
        self.rows = io.read_csv(self.path)
        if not self.rows:
            raise BadInput(f"catalog {path} is empty")
        missing = set(io.CATALOG_COLUMNS) - set(self.rows[0])
        if missing:
            raise BadInput(f"catalog lacks columns {sorted(missing)}")
        self.event_ids = list(dict.fromkeys(r["event_id"] for r in self.rows))
        self.by_event: dict[str, dict[str, dict]] = {}
        for r in self.rows:
            self.by_event.setdefault(r["event_id"], {})[r["station_id"]] = r

    def stations(self) -> list[dict]:
        p = self.root / "stations.csv"
        if p.exists():
            return io.read_csv(p)
        seen = {}
        for r in self.rows:
            seen.setdefault(r["station_id"], {"station_id": r["station_id"], "lat_deg": r["station_lat_deg"],
                                              "lon_deg": r["station_lon_deg"], "observing": "0"})
        return list(seen.values())

    def observing(self) -> tuple[str, ...]:
        obs = tuple(s["station_id"] for s in self.stations() if s.get("observing") in ("1", "True", "true"))
        if len(obs) != 3:
            raise BadInput(f"stations.csv must flag exactly 3 observing stations, found {len(obs)}")
        return obs

    def epicenter(self, event_id) -> GeoPoint:
        r = next(iter(self.by_event[event_id].values()))
        return GeoPoint(float(r["true_lat_deg"]), float(r["true_lon_deg"]))

    def waveform(self, event_id, station_id) -> Waveform:
        r = self.by_event[event_id][station_id]
        rate, x = io.read_wfm(self.root / r["wfm_path"])
        return Waveform(x, rate, station_id, event_id, 0.0)


def cmd_features(args) -> None:
    cat = Catalog(args.catalog)
    obs = cat.observing()

    def records():
        for eid in cat.event_ids:
            mats = []
            for sid in obs:
                t_p = float(cat.by_event[eid][sid]["true_t_p_s"])
                mats.append(extract_features(segment_event(cat.waveform(eid, sid), t_p)).values)
            yield eid, mats

    io.write_feature_store(args.out, records())
    print(f"wrote features for {len(cat.event_ids)} events ({', '.join(obs)}) to {args.out}")


def load_dataset(features_path, catalog_path) -> Dataset:
    cat = Catalog(catalog_path)
    store = io.read_feature_store(features_path)
    ids = [e for e in cat.event_ids if e in store]
    if not ids:
        raise BadInput("feature store and catalog share no events")
    raw = np.stack([np.stack(store[e]) for e in ids])
    return Dataset(ids, raw, [cat.epicenter(e) for e in ids], cat.observing())


# ------------------------------------------------------------- training


def _locator_cfg(spec) -> LocatorConfig:
    if spec is None:
        return PRESETS["desk_lstm"]
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise BadConfig(f"unknown preset {spec!r}; choose from {sorted(PRESETS)}")
        return PRESETS[spec]
    spec = dict(spec)
    base = PRESETS[spec.pop("preset")] if "preset" in spec else LocatorConfig()
    return replace(base, **spec).validate()


def _run_config(args) -> dict:
    d = _load_json(args.config) if getattr(args, "config", None) else {}
    extra = set(d) - {"locator", "train", "split", "normalization", "model_seed"}
    if extra:
        raise BadConfig(f"unknown config keys: {sorted(extra)}")
    seed = args.seed
    tr = dict(d.get("train", {}))
    sp = dict(d.get("split", {}))
    model_seed = d.get("model_seed", 0)
    if seed is not None:
        tr["seed"] = sp["seed"] = model_seed = seed
    return {
        "locator": _locator_cfg(d.get("locator")),
        "train": TrainConfig.from_dict(tr),
        "split": SplitSpec(**sp),
        "normalization": d.get("normalization", "per_signal"),
        "model_seed": model_seed,
    }


def _prepared(ds: Dataset, splits: Splits, normalization: str):
    tr = ds.subset(splits.train)
    std = fit_standardizer(tr)
    norm = Normalizer.fit(tr, normalization)
    return tr, std, norm


def _write_splits(path, splits: Splits) -> None:
    _dump_json(path, {"train": list(splits.train), "val": list(splits.val), "test": list(splits.test)})


def _read_splits(path) -> Splits:
    d = _load_json(path)
    return Splits(tuple(d["train"]), tuple(d["val"]), tuple(d["test"]))


def _log(quiet):
    return None if quiet else (lambda s: print(s, flush=True))


def cmd_train(args) -> None:
    rc = _run_config(args)
    ds = load_dataset(args.features, args.catalog)
    splits = split_dataset(ds.event_ids, rc["split"])
    tr, std, norm = _prepared(ds, splits, rc["normalization"])
    loc = build_locator(rc["locator"], seed=rc["model_seed"], standardizer=std)
    loc.normalization = norm.to_dict()
    loc, hist = train(loc, prepare(tr, norm, std), prepare(ds.subset(splits.val), norm, std), rc["train"],
                      log=_log(args.quiet))
    out = _out_dir(args.out)
    loc.save(out / "model.vloc")
    (out / "history.csv").write_text(hist.to_csv())
    _write_splits(out / "splits.json", splits)
    print(f"best epoch {hist.best_epoch + 1}: val MAE {hist.best_val_mae_km:.4f} km -> {out / 'model.vloc'}")


def cmd_gridsearch(args) -> None:
    rc = _run_config(args)
    space = GridSpace.from_dict(_load_json(args.space)) if args.space else GridSpace()
    ds = load_dataset(args.features, args.catalog)
    splits = split_dataset(ds.event_ids, rc["split"])
    tr, std, norm = _prepared(ds, splits, rc["normalization"])
    seed = rc["model_seed"]
    res = grid_search(space, prepare(tr, norm, std), prepare(ds.subset(splits.val), norm, std), std,
                      budget=args.budget, base=rc["locator"], train_cfg=rc["train"], seed=seed,
                      log=_log(args.quiet))
    out = _out_dir(args.out)
    (out / "ranking.csv").write_text(res.ranking_csv())
    _write_splits(out / "splits.json", splits)
    if res.best is not None:
        res.best.normalization = norm.to_dict()
        res.best.save(out / "best.vloc")
    print(f"best: {res.best_point} val MAE {res.trials[0].val_mae_km:.4f} km")


def cmd_eval(args) -> None:
    loc = Locator.load(args.checkpoint)
    ds = load_dataset(args.features, args.catalog)
    splits = _read_splits(args.splits)
    tr = ds.subset(splits.train)
    norm = Normalizer.from_dict(loc.normalization)
    which = ds.subset(getattr(splits, args.split))
    rep = evaluate(loc, prepare(which, norm, loc.standardizer), tr.epicenters)
    out = _out_dir(args.out)
    _dump_json(out / "report.json", rep.to_dict())
    print(f"{args.split}: MAE {rep.mae_km:.4f} km, success {rep.success_rate:.3f} over {rep.n_events} events")


# --------------------------------------------------------------- picker


def cmd_pick(args) -> None:
    cat = Catalog(args.catalog)
    pc = PickerConfig(**_load_json(args.config)) if args.config else PickerConfig()
    rows = []
    for eid in cat.event_ids:
        for sid in cat.by_event[eid]:
            r = pick(cat.waveform(eid, sid), pc)
            rows.append({"event_id": eid, "station_id": sid, "t_p_s": r.t_p, "t_s_s": r.t_s,
                         "p_quality": r.p_quality, "s_quality": r.s_quality})
    io.write_csv(args.out, io.PICK_COLUMNS, rows)
    print(f"wrote {len(rows)} picks to {args.out}")


def cmd_locate(args) -> None:
    cat = Catalog(args.catalog)
    stations = cat.stations()
    lat = np.array([float(s["lat_deg"]) for s in stations])
    lon = np.array([float(s["lon_deg"]) for s in stations])
    frame = LocalFrame(GeoPoint(float(lat.mean()), float(lon.mean())))
    sx, sy = frame.to_local(lat, lon)
    xy = {s["station_id"]: (float(x), float(y)) for s, x, y in zip(stations, sx, sy)}
    vm = VelocityModel(**_load_json(args.velocity)) if args.velocity else VelocityModel()
    picks: dict[str, dict[str, PickResult]] = {}
    for r in io.read_csv(args.picks):
        picks.setdefault(r["event_id"], {})[r["station_id"]] = PickResult(
            io.parse_float(r["t_p_s"]), io.parse_float(r["t_s_s"]),
            float(r["p_quality"] or 0), float(r["s_quality"] or 0))
    rows = []
    for eid, pk in picks.items():
        loc = locate_from_picks(pk, xy, vm)
        p = frame.from_local(loc.x, loc.y) if loc.located else (None, None)
        rows.append({"event_id": eid, "est_lat": None if p[0] is None else float(p[0]),
                     "est_lon": None if p[1] is None else float(p[1]),
                     "rms_residual_km": loc.rms_residual, "n_stations": len(loc.station_ids)})
    io.write_csv(args.out, io.LOCATION_COLUMNS, rows)
    print(f"located {sum(r['est_lat'] is not None for r in rows)} of {len(rows)} events -> {args.out}")


# --------------------------------------------------------------- report


def cmd_report(args) -> None:
    """Merge EvalReport JSON files into cumulative-curve, ring and density tables."""
    out = _out_dir(args.out)
    curves, rings, pairs = [], [], []
    for path in args.reports:
        name = Path(path).parent.name or Path(path).stem
        rep = EvalReport.from_dict(_load_json(path))
        curves += [{"run": name, "error_km": e, "fraction": f} for e, f in rep.cumulative_curve]
        for r in rep.ring_stats:
            row = {"run": name}
            row.update(r.__dict__)
            rings.append(row)
        pairs += [{"run": name, "train_density_per_km2": d, "test_success_rate": s}
                  for d, s in density_success_pairs(rep.ring_stats)]
    io.write_csv(out / "cumulative.csv", ["run", "error_km", "fraction"], curves)
    ring_cols = ["run"] + (list(rings[0])[1:] if rings else [])
    io.write_csv(out / "rings.csv", ring_cols, rings)
    io.write_csv(out / "density_success.csv", ["run", "train_density_per_km2", "test_success_rate"], pairs)
    print(f"merged {len(args.reports)} reports into {out}")


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="volcloc", description="Synthetic volcano-seismic event location toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic scenario (catalog + waveforms)")
    sp.add_argument("--config", help="ScenarioConfig JSON")
    sp.add_argument("--out", required=True)

    sp = add("features", cmd_features, "extract the feature store from a catalog")
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--out", required=True)

    for name, fn, help_ in (("train", cmd_train, "train a locator"),
                            ("gridsearch", cmd_gridsearch, "hyperparameter grid search")):
        sp = add(name, fn, help_)
        sp.add_argument("--features", required=True)
        sp.add_argument("--catalog", required=True)
        sp.add_argument("--config", help="run config JSON (locator, train, split, normalization)")
        sp.add_argument("--out", required=True)
        sp.add_argument("--quiet", action="store_true")
        if name == "gridsearch":
            sp.add_argument("--space", help="GridSpace JSON")
            sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)

    sp = add("eval", cmd_eval, "evaluate a checkpoint on a split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--splits", required=True)
    sp.add_argument("--split", choices=("train", "val", "test"), default="test")
    sp.add_argument("--out", required=True)

    sp = add("pick", cmd_pick, "STA/LTA P and S picks for every catalog record")
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--config", help="PickerConfig JSON")
    sp.add_argument("--out", required=True)

    sp = add("locate", cmd_locate, "triangulate events from a picks CSV")
    sp.add_argument("--picks", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--velocity", help="VelocityModel JSON")
    sp.add_argument("--out", required=True)

    sp = add("report", cmd_report, "merge report.json files into plot tables")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except VolcLocError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
