"""Model specifications, training, prediction, cross-validation and
grid search for the three classifier families."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from pupilffd.classifiers.forest import RandomForest, fit_random_forest
from pupilffd.classifiers.gbm import GradientBoosting, fit_gradient_boosting
from pupilffd.classifiers.mlp import MLP, fit_mlp
from pupilffd.core import CONDITION_ORDER, Condition
from pupilffd.features import VECTOR_LENGTH, FeatureVector

MODEL_FORMAT = "ffd-model/1"

# Default hyperparameters per family. "auto" max_features resolves to
# floor(sqrt(n_features)); estimator counts are plain thousands.
FAMILY_DEFAULTS: dict[str, dict] = {
    "random_forest": {
        "n_estimators": 1000,
        "criterion": "entropy",
        "max_depth": 5,
        "min_samples_split": 5,
        "min_samples_leaf": 3,
        "max_features": "auto",
        "bootstrap": True,
    },
    "gradient_boosting": {
        "loss": "deviance",
        "learning_rate": 0.01,
        "n_estimators": 1000,
        "subsample": 1.0,
        "criterion": "squared_error",
        "min_samples_split": 10,
        "min_samples_leaf": 5,
        "max_depth": 5,
        "max_features": "auto",
    },
    "mlp": {
        "hidden_layer_sizes": (25, 10),
        "activation": "relu",
        "solver": "adam",
        "alpha": 1e-5,
        "batch_size": "auto",
        "learning_rate": "constant",
        "learning_rate_init": 1e-3,
        "max_iter": 300,
        "tol": 1e-6,
    },
}

_FIXED_CHOICES = {
    "random_forest": {"criterion": ("entropy",)},
    "gradient_boosting": {"loss": ("deviance",), "criterion": ("squared_error",)},
    "mlp": {"activation": ("relu",), "solver": ("adam",), "learning_rate": ("constant",)},
}


@dataclass(frozen=True)
class ModelSpec:
    """A classifier family plus its full hyperparameter set and seed."""

    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILY_DEFAULTS:
            raise ValueError(f"unknown model family {self.family!r}; "
                             f"expected one of {sorted(FAMILY_DEFAULTS)}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        defaults = FAMILY_DEFAULTS[self.family]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(f"{self.family}: unknown hyperparameter(s) "
                             f"{sorted(unknown)}")
        merged = {**defaults, **self.hyperparameters}
        for key, allowed in _FIXED_CHOICES[self.family].items():
            if merged[key] not in allowed:
                raise ValueError(f"{self.family}: {key}={merged[key]!r} is not supported "
                                 f"(expected one of {allowed})")
        object.__setattr__(self, "hyperparameters", merged)

    def resolved(self, key: str):
        return self.hyperparameters[key]


def default_spec(family: str, seed: int = 0) -> ModelSpec:
    return ModelSpec(family=family, seed=seed)


def spec_from_config(path: str | Path, family: str, seed: int = 0) -> ModelSpec:
    """Load one family's hyperparameters from a JSON config file."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if family not in payload:
        raise ValueError(f"{path}: no section for family {family!r}")
    params = dict(payload[family])
    if "hidden_layer_sizes" in params:
        params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
    return ModelSpec(family=family, hyperparameters=params, seed=seed)


@dataclass
class Dataset:
    """Labelled feature vectors with an optional split tag."""

    vectors: list[FeatureVector]
    split: str = ""

    def __post_init__(self) -> None:
        for fv in self.vectors:
            if fv.values.shape != (VECTOR_LENGTH,):
                raise ValueError("all feature vectors must have length "
                                 f"{VECTOR_LENGTH}")

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def X(self) -> np.ndarray:
        return np.stack([fv.values for fv in self.vectors])

    @property
    def y(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(CONDITION_ORDER)}
        return np.array([index[fv.condition] for fv in self.vectors], dtype=np.int64)

    def subset(self, idx: np.ndarray, split: str = "") -> "Dataset":
        return Dataset(vectors=[self.vectors[i] for i in idx], split=split)


@dataclass(frozen=True)
class PredictionResult:
    condition: Condition
    probabilities: np.ndarray  # over CONDITION_ORDER
    fit_probability: float

    @property
    def fit_class(self) -> str:
        return self.condition.fit_class

    @property
    def unfit_score(self) -> float:
        return 1.0 - self.fit_probability


@dataclass
class TrainedModel:
    """Immutable fitted classifier over the four conditions."""

    spec: ModelSpec
    classes: tuple[Condition, ...]
    impl: RandomForest | GradientBoosting | MLP
    n_training_samples: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != VECTOR_LENGTH:
            raise ValueError(f"expected (n, {VECTOR_LENGTH}) features, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        return self.impl.predict_proba(X)


def _resolve_max_features(value, n_features: int) -> int:
    if value == "auto":
        return int(math.floor(math.sqrt(n_features)))
    if value in (None, "all"):
        return n_features
    if isinstance(value, int) and value >= 1:
        return min(value, n_features)
    raise ValueError(f"unsupported max_features value {value!r}")


def train(spec: ModelSpec, data: Dataset) -> TrainedModel:
    """Fit the family described by ``spec`` on the dataset.

    Deterministic given (spec.seed, data order). Gradient boosting and
    the MLP refuse single-class data; a single-class forest degenerates
    to a constant predictor.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    X = data.X
    y = data.y
    if not np.all(np.isfinite(X)):
        raise ValueError("training features must be finite")
    h = spec.hyperparameters
    n_classes = len(CONDITION_ORDER)
    if spec.family == "random_forest":
        impl = fit_random_forest(
            X, y, n_classes,
            n_estimators=h["n_estimators"], max_depth=h["max_depth"],
            min_samples_split=h["min_samples_split"],
            min_samples_leaf=h["min_samples_leaf"],
            max_features=_resolve_max_features(h["max_features"], X.shape[1]),
            bootstrap=h["bootstrap"], seed=spec.seed)
    elif spec.family == "gradient_boosting":
        impl = fit_gradient_boosting(
            X, y, n_classes,
            n_estimators=h["n_estimators"], learning_rate=h["learning_rate"],
            subsample=h["subsample"], max_depth=h["max_depth"],
            min_samples_split=h["min_samples_split"],
            min_samples_leaf=h["min_samples_leaf"],
            max_features=_resolve_max_features(h["max_features"], X.shape[1]),
            seed=spec.seed)
    else:
        impl = fit_mlp(
            X, y, n_classes,
            hidden_layer_sizes=h["hidden_layer_sizes"], alpha=h["alpha"],
            batch_size=h["batch_size"], learning_rate_init=h["learning_rate_init"],
            max_iter=h["max_iter"], tol=h["tol"], seed=spec.seed)
    return TrainedModel(spec=spec, classes=CONDITION_ORDER, impl=impl,
                        n_training_samples=len(data))


def predict(model: TrainedModel, fv: FeatureVector | np.ndarray) -> PredictionResult:
    """Classify one feature vector.

    Returns the argmax condition (ties resolve in the fixed class
    order control < alcohol < drug < sleep), the four-class probability
    vector, and the fit probability (posterior of control).
    """
    values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64)
    proba = model.predict_proba(values.reshape(1, -1))[0]
    condition = model.classes[int(np.argmax(proba))]
    return PredictionResult(condition=condition, probabilities=proba,
                            fit_probability=float(proba[0]))


def predict_dataset(model: TrainedModel, data: Dataset) -> list[PredictionResult]:
    proba = model.predict_proba(data.X)
    return [
        PredictionResult(condition=model.classes[int(np.argmax(p))],
                         probabilities=p, fit_probability=float(p[0]))
        for p in proba
    ]


@dataclass(frozen=True)
class FoldMetrics:
    accuracy: float
    sensitivity: dict[Condition, float]


@dataclass(frozen=True)
class CVResult:
    folds: list[FoldMetrics]
    mean_accuracy: float
    std_accuracy: float
    mean_sensitivity: dict[Condition, float]


def kfold_cv(spec: ModelSpec, data: Dataset, k: int = 5) -> CVResult:
    """Stratified k-fold cross-validation.

    Fold assignment shuffles each class with a stream derived from
    ``spec.seed`` and deals samples round-robin, so every class needs at
    least ``k`` samples and folds are reproducible.
    """
    y = data.y
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 104729]))
    fold_of = np.empty(len(data), dtype=np.int64)
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        if len(members) < k:
            raise ValueError(
                f"class {CONDITION_ORDER[label].value!r} has {len(members)} samples, "
                f"fewer than k={k}")
        rng.shuffle(members)
        fold_of[members] = np.arange(len(members)) % k
    folds = []
    for fold in range(k):
        test_idx = np.flatnonzero(fold_of == fold)
        train_idx = np.flatnonzero(fold_of != fold)
        model = train(spec, data.subset(train_idx))
        proba = model.predict_proba(data.subset(test_idx).X)
        pred = np.argmax(proba, axis=1)
        truth = y[test_idx]
        accuracy = float(np.mean(pred == truth))
        sensitivity = {}
        for i, condition in enumerate(CONDITION_ORDER):
            tp = int(np.sum((truth == i) & (pred == i)))
            pos = int(np.sum(truth == i))
            sensitivity[condition] = tp / pos if pos else 0.0
        folds.append(FoldMetrics(accuracy=accuracy, sensitivity=sensitivity))
    accs = np.array([f.accuracy for f in folds])
    mean_sens = {
        c: float(np.mean([f.sensitivity[c] for f in folds])) for c in CONDITION_ORDER}
    return CVResult(folds=folds, mean_accuracy=float(accs.mean()),
                    std_accuracy=float(accs.std()), mean_sensitivity=mean_sens)


def macro_precision(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> float:
    """Precision averaged over all classes; empty-prediction classes score 0."""
    scores = []
    for i in range(n_classes):
        predicted = int(np.sum(pred == i))
        tp = int(np.sum((pred == i) & (truth == i)))
        scores.append(tp / predicted if predicted else 0.0)
    return float(np.mean(scores))


@dataclass(frozen=True)
class GridTrial:
    spec: ModelSpec
    score: float


@dataclass(frozen=True)
class GridSearchResult:
    best_spec: ModelSpec
    best_score: float
    trials: list[GridTrial]


def grid_search(family: str, grid: dict[str, list], train_data: Dataset,
                val_data: Dataset, seed: int = 0, objective: str = "precision",
                on_fit: Callable[[ModelSpec], None] | None = None) -> GridSearchResult:
    """Exhaustive hyperparameter search maximising macro precision.

    Every combination of the grid's value lists is evaluated, iterating
    keys in the grid's insertion order and values in list order; ties
    keep the first-seen combination. ``on_fit`` is invoked once per
    fitted candidate (instrumentation hook).
    """
    if objective != "precision":
        raise ValueError(f"unsupported objective {objective!r}")
    if not grid:
        raise ValueError("grid must contain at least one hyperparameter")
    if len(val_data) == 0:
        raise ValueError("validation data must not be empty")
    keys = list(grid.keys())
    best: GridTrial | None = None
    trials = []
    val_truth = val_data.y
    for combo in itertools.product(*(grid[k] for k in keys)):
        spec = ModelSpec(family=family, hyperparameters=dict(zip(keys, combo)), seed=seed)
        if on_fit is not None:
            on_fit(spec)
        model = train(spec, train_data)
        pred = np.argmax(model.predict_proba(val_data.X), axis=1)
        score = macro_precision(val_truth, pred, len(CONDITION_ORDER))
        trial = GridTrial(spec=spec, score=score)
        trials.append(trial)
        if best is None or score > best.score:
            best = trial
    return GridSearchResult(best_spec=best.spec, best_score=best.score, trials=trials)


# ---------------------------------------------------------------------------
# persistence

_IMPL_TAGS = {"random_forest": RandomForest, "gradient_boosting": GradientBoosting,
              "mlp": MLP}


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write a trained model as versioned JSON (bit-exact round trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    hyper = dict(model.spec.hyperparameters)
    if "hidden_layer_sizes" in hyper:
        hyper["hidden_layer_sizes"] = list(hyper["hidden_layer_sizes"])
    payload = {
        "format": MODEL_FORMAT,
        "family": model.spec.family,
        "seed": model.spec.seed,
        "hyperparameters": hyper,
        "classes": [c.value for c in model.classes],
        "n_training_samples": model.n_training_samples,
        "model": model.impl.to_json(),
    }
    path.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unsupported model format {payload.get('format')!r}")
    family = payload["family"]
    hyper = dict(payload["hyperparameters"])
    if "hidden_layer_sizes" in hyper:
        hyper["hidden_layer_sizes"] = tuple(hyper["hidden_layer_sizes"])
    spec = ModelSpec(family=family, hyperparameters=hyper, seed=payload["seed"])
    impl = _IMPL_TAGS[family].from_json(payload["model"])
    classes = tuple(Condition(c) for c in payload["classes"])
    return TrainedModel(spec=spec, classes=classes, impl=impl,
                        n_training_samples=payload["n_training_samples"])
