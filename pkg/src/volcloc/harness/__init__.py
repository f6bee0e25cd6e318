from .data import (
    Dataset,
    Normalizer,
    Prepared,
    SplitSpec,
    Splits,
    build_dataset,
    fit_standardizer,
    prepare,
    split_dataset,
)
from .evaluate import centroid_predictor, constant_predictor, evaluate, oracle_predictor, report_from_predictions
from .gridsearch import ALLOWED, DEFAULT_BUDGET, GridResult, GridSpace, Trial, grid_search
from .pipeline import PreparedSplits, RunResult, fit_and_evaluate, prepare_splits, run_pipeline
from .training import TrainConfig, TrainHistory, train, validation_mae_km
