"""Classifier families (random forest, gradient boosting, MLP) built on
plain numpy, plus training, cross-validation, grid search and model
persistence."""

from pupilffd.classifiers.api import (
    FAMILY_DEFAULTS,
    CVResult,
    Dataset,
    GridSearchResult,
    ModelSpec,
    PredictionResult,
    TrainedModel,
    default_spec,
    grid_search,
    kfold_cv,
    load_model,
    macro_precision,
    predict,
    predict_dataset,
    save_model,
    spec_from_config,
    train,
)
from pupilffd.classifiers.cart import Tree, grow_tree
from pupilffd.classifiers.forest import RandomForest, fit_random_forest
from pupilffd.classifiers.gbm import GradientBoosting, fit_gradient_boosting
from pupilffd.classifiers.mlp import MLP, fit_mlp

__all__ = [
    "FAMILY_DEFAULTS",
    "CVResult",
    "Dataset",
    "GridSearchResult",
    "ModelSpec",
    "PredictionResult",
    "TrainedModel",
    "Tree",
    "RandomForest",
    "GradientBoosting",
    "MLP",
    "default_spec",
    "fit_gradient_boosting",
    "fit_mlp",
    "fit_random_forest",
    "grid_search",
    "grow_tree",
    "kfold_cv",
    "load_model",
    "macro_precision",
    "predict",
    "predict_dataset",
    "save_model",
    "spec_from_config",
    "train",
]
