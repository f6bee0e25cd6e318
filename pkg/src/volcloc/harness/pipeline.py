"""One seeded run: scenario -> features -> split -> train -> evaluate."""

from __future__ import annotations

from dataclasses import dataclass

from ..geo import EvalReport
from ..locator import Locator, LocatorConfig, build_locator
from ..synth import Scenario, ScenarioConfig, gen_scenario
from .data import Dataset, Normalizer, Prepared, SplitSpec, Splits, build_dataset, fit_standardizer, prepare, split_dataset
from .evaluate import evaluate
from .training import TrainConfig, TrainHistory, train


@dataclass
class PreparedSplits:
    splits: Splits
    train: Prepared
    val: Prepared
    test: Prepared
    normalizer: Normalizer
    standardizer: object


def prepare_splits(ds: Dataset, spec: SplitSpec = SplitSpec(), normalization: str = "per_signal") -> PreparedSplits:
    """Split by event; fit targets and (corpus) feature statistics on the training part only."""
    sp = split_dataset(ds.event_ids, spec)
    tr = ds.subset(sp.train)
    std = fit_standardizer(tr)
    norm = Normalizer.fit(tr, normalization)
    return PreparedSplits(sp, prepare(tr, norm, std), prepare(ds.subset(sp.val), norm, std),
                          prepare(ds.subset(sp.test), norm, std), norm, std)


@dataclass
class RunResult:
    locator: Locator
    history: TrainHistory
    report: EvalReport
    data: PreparedSplits


def fit_and_evaluate(data: PreparedSplits, cfg: LocatorConfig, train_cfg: TrainConfig, model_seed: int = 0,
                     log=None) -> RunResult:
    loc = build_locator(cfg, seed=model_seed, standardizer=data.standardizer)
    loc.normalization = data.normalizer.to_dict()
    loc, hist = train(loc, data.train, data.val, train_cfg, log=log)
    rep = evaluate(loc, data.test, data.train.epicenters)
    return RunResult(loc, hist, rep, data)


def run_pipeline(scenario_cfg: ScenarioConfig, cfg: LocatorConfig, train_cfg: TrainConfig,
                 spec: SplitSpec = SplitSpec(), normalization: str = "per_signal", model_seed: int = 0,
                 log=None) -> RunResult:
    scenario: Scenario = gen_scenario(scenario_cfg)
    data = prepare_splits(build_dataset(scenario), spec, normalization)
    return fit_and_evaluate(data, cfg, train_cfg, model_seed, log)
