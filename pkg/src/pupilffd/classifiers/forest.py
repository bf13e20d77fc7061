"""Random forest of entropy CART trees with soft voting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pupilffd.classifiers.cart import Tree, grow_tree


@dataclass
class RandomForest:
    trees: list[Tree]
    n_classes: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        proba = np.zeros((len(X), self.n_classes), dtype=np.float64)
        for tree in self.trees:
            proba += tree.predict_value(X)
        return proba / len(self.trees)

    def to_json(self) -> dict:
        return {"n_classes": self.n_classes, "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, obj: dict) -> "RandomForest":
        return cls(trees=[Tree.from_json(t) for t in obj["trees"]],
                   n_classes=obj["n_classes"])


def fit_random_forest(X: np.ndarray, y: np.ndarray, n_classes: int, *,
                      n_estimators: int, max_depth: int, min_samples_split: int,
                      min_samples_leaf: int, max_features: int, bootstrap: bool,
                      seed: int) -> RandomForest:
    """Bagged CART trees with per-split feature subsampling.

    Tree ``t`` draws its bootstrap sample and all of its per-node
    feature subsets from a stream derived from ``(seed, t)``, so trees
    are reproducible independently and may be grown in parallel.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(grow_tree(
            X[idx], y[idx], mode="entropy", n_classes=n_classes,
            max_depth=max_depth, min_samples_split=min_samples_split,
            min_samples_leaf=min_samples_leaf, max_features=max_features, rng=rng))
    return RandomForest(trees=trees, n_classes=n_classes)
