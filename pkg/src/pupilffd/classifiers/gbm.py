"""Gradient boosting with multinomial deviance (one tree per class per stage)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pupilffd.classifiers.cart import Tree, grow_tree

_PRIOR_FLOOR = 1e-12


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class GradientBoosting:
    init_scores: np.ndarray  # (K,) log class priors
    stages: list[list[Tree]]  # one regression tree per class per stage
    learning_rate: float
    n_classes: int
    train_deviance: np.ndarray  # deviance before boosting, then after each stage

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scores = np.tile(self.init_scores, (len(X), 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                scores[:, k] += self.learning_rate * tree.predict_value(X)
        return scores

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.decision_scores(X))

    def to_json(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "learning_rate": self.learning_rate,
            "init_scores": [float(v) for v in self.init_scores],
            "stages": [[t.to_json() for t in stage] for stage in self.stages],
            "train_deviance": [float(v) for v in self.train_deviance],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GradientBoosting":
        return cls(
            init_scores=np.asarray(obj["init_scores"], dtype=np.float64),
            stages=[[Tree.from_json(t) for t in stage] for stage in obj["stages"]],
            learning_rate=obj["learning_rate"],
            n_classes=obj["n_classes"],
            train_deviance=np.asarray(obj["train_deviance"], dtype=np.float64),
        )


def _deviance(proba: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.maximum(proba[np.arange(len(y)), y], 1e-300))))


def fit_gradient_boosting(X: np.ndarray, y: np.ndarray, n_classes: int, *,
                          n_estimators: int, learning_rate: float, subsample: float,
                          max_depth: int, min_samples_split: int, min_samples_leaf: int,
                          max_features: int, seed: int) -> GradientBoosting:
    """Stagewise multinomial-deviance boosting.

    Scores start at the log class priors. Each stage fits one
    squared-error regression tree per class to the residuals
    ``y_k - p_k`` and replaces its leaf values with the Newton step

        gamma = (K-1)/K * sum(r) / sum(|r| * (1 - |r|))

    over the leaf's members, then advances the scores by
    ``learning_rate * gamma``. Training deviance is recorded before
    boosting and after every stage. Tree ``(m, k)`` derives its random
    stream from ``(seed, m*K + k)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("gradient boosting needs at least 2 classes in the training data")
    n = len(X)
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    priors = onehot.mean(axis=0)
    init_scores = np.log(np.maximum(priors, _PRIOR_FLOOR))
    scores = np.tile(init_scores, (n, 1))
    deviance = [_deviance(_softmax(scores), y)]
    stages: list[list[Tree]] = []
    factor = (n_classes - 1) / n_classes
    for m in range(n_estimators):
        proba = _softmax(scores)
        residual = onehot - proba
        stage: list[Tree] = []
        for k in range(n_classes):
            rng = np.random.default_rng(np.random.SeedSequence([seed, m * n_classes + k]))
            if subsample < 1.0:
                rows = rng.choice(n, size=max(1, int(round(subsample * n))), replace=False)
            else:
                rows = np.arange(n)
            tree = grow_tree(
                X[rows], residual[rows, k], mode="squared_error",
                max_depth=max_depth, min_samples_split=min_samples_split,
                min_samples_leaf=min_samples_leaf, max_features=max_features, rng=rng)
            # Newton leaf values estimated on the in-bag samples.
            leaves = tree.apply(X)
            r_bag = residual[rows, k]
            leaves_bag = leaves[rows]
            num = np.bincount(leaves_bag, weights=r_bag, minlength=tree.n_nodes)
            den = np.bincount(leaves_bag, weights=np.abs(r_bag) * (1.0 - np.abs(r_bag)),
                              minlength=tree.n_nodes)
            usable = np.abs(den) > 1e-150
            gamma = np.zeros(tree.n_nodes, dtype=np.float64)
            gamma[usable] = factor * num[usable] / den[usable]
            tree.value = gamma
            scores[:, k] += learning_rate * gamma[leaves]
            stage.append(tree)
        stages.append(stage)
        deviance.append(_deviance(_softmax(scores), y))
    return GradientBoosting(init_scores=init_scores, stages=stages,
                            learning_rate=learning_rate, n_classes=n_classes,
                            train_deviance=np.asarray(deviance))
